from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toeplab import asymfit, models, spectral, specfun
from toeplab.errors import ValidationError
from toeplab.models import CircleBundleModel, TorusGrauertTube
from toeplab.specfun import BumpFunction

CHI = BumpFunction(1.0, 2.0)
T2 = TorusGrauertTube(2, 0.5)
CP1 = CircleBundleModel.cp1()


def test_counting_examples():
    assert spectral.counting(CP1, 2.5) == 5
    assert spectral.counting(T2, models.eigenvalue(T2, 1)) == 4
    assert spectral.counting(T2, 0.1) == 0
    assert spectral.counting(CP1, 0.5) == 0
    with pytest.raises(ValidationError):
        spectral.counting(T2, 0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.5, 60), b=st.floats(0.5, 60))
def test_counting_monotone(a, b):
    lo, hi = sorted((a, b))
    assert spectral.counting(T2, lo) <= spectral.counting(T2, hi)


def test_weyl_scan_examples():
    assert spectral.weyl_scan(CP1, [10, 20, 40]) == [(10.0, 65), (20.0, 230), (40.0, 860)]
    assert spectral.weyl_scan(CP1, []) == []
    series = spectral.weyl_scan(T2, [50, 100, 200, 400])
    assert [n for _, n in series] == [spectral.counting(T2, k) for k, _ in series]
    f = asymfit.fit_power(series)
    assert 1.9 <= f.exponent <= 2.1
    with pytest.raises(ValidationError):
        spectral.weyl_scan(T2, [100, 50])


def test_limit_pairing_examples():
    assert spectral.limit_pairing(T2, CHI) == pytest.approx(2 * math.pi * specfun.bump_moment(CHI, 1), rel=1e-14)
    assert spectral.limit_pairing(TorusGrauertTube(3, 0.5), CHI) == pytest.approx(
        4 * math.pi * specfun.bump_moment(CHI, 2), rel=1e-14)
    assert spectral.limit_pairing(CP1, CHI) == pytest.approx(specfun.bump_moment(CHI, 1), rel=1e-14)


def test_mu_pairing_linear_in_chi():
    for k in (37.0, 100.0):
        a = spectral.mu_pairing(T2, CHI, k)
        b = spectral.mu_pairing(T2, BumpFunction(1.0, 2.0, scale=2.5), k)
        assert b.pairing == pytest.approx(2.5 * a.pairing, rel=1e-14)
        assert b.n_eigen == a.n_eigen


def test_mu_pairing_k200_within_band():
    r = spectral.mu_pairing(T2, CHI, 200)
    assert r.rel_error <= 0.05
    assert r.n_eigen > 0


def test_empty_window():
    r = spectral.mu_pairing(CP1, CHI, 1.0)
    assert r.pairing == 0.0 and r.n_eigen == 0
    assert spectral.trace_chi(CP1, CHI, 1.0) == 0.0
    # no lambda/k inside (1, 2) once k is below the lowest eigenvalue
    assert spectral.mu_pairing(T2, CHI, 0.2).n_eigen == 0


def test_trace_equals_scaled_pairing():
    for model in (T2, CP1, TorusGrauertTube(3, 0.5)):
        k = 100.0 if model is not CP1 else 300.0
        r = spectral.mu_pairing(model, CHI, k)
        tr = spectral.trace_chi(model, CHI, k)
        assert r.pairing * k ** (model.cr_dimension + 1) == pytest.approx(tr, rel=1e-15)


def test_support_window_exact():
    k = 80.0
    lam, mult = spectral.window(T2, CHI, k)
    assert np.all((lam > k) & (lam < 2 * k))
    all_lam, all_mult = T2.spectrum_arrays(2.5 * k)
    outside = (all_lam <= k) | (all_lam >= 2 * k)
    assert np.all(CHI.eval(all_lam[outside] / k) == 0.0)
    assert spectral.trace_chi(T2, CHI, k) == math.fsum(all_mult * CHI.eval(all_lam / k))


def test_trace_invariant_under_merging():
    # splitting each multiplicity into unit entries and shuffling leaves the exactly rounded sum unchanged
    k = 60.0
    lam, mult = spectral.window(T2, CHI, k)
    vals = np.repeat(CHI.eval(lam / k), mult)
    np.random.default_rng(0).shuffle(vals)
    assert math.fsum(vals) == spectral.trace_chi(T2, CHI, k)


def test_measure_convergence_n2():
    errs = [spectral.mu_pairing(T2, CHI, k).rel_error for k in (50, 100, 200, 400)]
    for a, b in zip(errs, errs[1:]):
        assert b <= 1.1 * a
    assert errs[-1] <= 0.03
    assert errs[-1] <= errs[1]


def test_circle_bundle_euler_maclaurin():
    # sum (m + 1) chi(m / k) = k^2 int t chi + k int chi + O(k^-N) for smooth compactly supported chi
    m1 = specfun.bump_moment(CHI, 1)
    m0 = specfun.bump_moment(CHI, 0)
    for k in (100, 200, 400, 800):
        tr = spectral.trace_chi(CP1, CHI, k)
        assert (tr - k * k * m1) / k == pytest.approx(m0, rel=1e-8)


def test_measure_report_shape(tmp_path):
    rep = spectral.measure_report(T2, CHI, [50, 100])
    assert set(rep) == {"model", "params", "chi", "entries"}
    assert set(rep["entries"][0]) == {"k", "pairing", "limit", "n_eigen"}
    spectral.write_series_csv(tmp_path / "m.csv", [(50, 1.0), (100, 2.0)])
    assert (tmp_path / "m.csv").read_text().startswith("k,value\n50,1\n")
