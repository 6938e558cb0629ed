from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toeplab import models, specfun
from toeplab.errors import DomainError, ResourceError, UnsupportedError, ValidationError
from toeplab.models import CircleBundleModel, PointX, TorusGrauertTube


def brute_counts(n, N):
    R = math.isqrt(N)
    counts = np.zeros(N + 1, dtype=np.int64)
    grid = np.array(list(itertools.product(range(-R, R + 1), repeat=n)))
    s = (grid ** 2).sum(axis=1)
    np.add.at(counts, s[s <= N], 1)
    return counts


def test_square_counts_brute_force():
    assert np.array_equal(models.square_counts(2, 10_000), brute_counts(2, 10_000))
    assert np.array_equal(models.square_counts(3, 1_000), brute_counts(3, 1_000))
    assert np.array_equal(models.square_counts(4, 200), brute_counts(4, 200))


def test_lattice_shell_examples():
    s = models.lattice_shells(2, 1)
    assert [(x.norm_sq, x.count) for x in s] == [(1, 4)]
    by_n = {x.norm_sq: x.count for x in models.lattice_shells(2, 5)}
    assert by_n[25] == 12
    s3 = models.lattice_shells(3, 1.7)
    assert [(x.norm_sq, x.count) for x in s3] == [(1, 6), (2, 12)]
    assert models.lattice_shells(2, 5)[0].lam == pytest.approx(specfun.bessel_i(1, 1) / specfun.bessel_i(0, 1))


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("lo,hi", [(0, 0), (0, 30), (5, 17), (26, 26), (40, 39)])
def test_lattice_vectors_brute_force(n, lo, hi):
    R = math.isqrt(max(hi, 0))
    ref = sorted(v for v in itertools.product(range(-R, R + 1), repeat=n) if lo <= sum(c * c for c in v) <= hi)
    got = [tuple(int(c) for c in row) for row in models.lattice_vectors(n, lo, hi)]
    assert got == ref


def test_eigenvalue_examples():
    t2 = TorusGrauertTube(2, 0.5)
    assert models.eigenvalue(t2, 0) == 0.0
    assert models.eigenvalue(t2, 1) == pytest.approx(0.44639, abs=1e-5)
    assert models.eigenvalue(t2, 1) == pytest.approx(specfun.bessel_i(1, 1) / specfun.bessel_i(0, 1), rel=1e-12)
    assert models.eigenvalue(TorusGrauertTube(3, 0.5), 1) == pytest.approx(1 / math.tanh(1) - 1, rel=1e-12)
    reeb = TorusGrauertTube(2, 0.5, "reeb")
    assert models.eigenvalue(reeb, 3) == pytest.approx(models.eigenvalue(t2, 3) / 0.5, rel=1e-14)
    with pytest.raises(DomainError):
        models.eigenvalue(t2, -1)


@pytest.mark.parametrize("n", [2, 3])
def test_eigenvalue_monotone_and_ratio(n):
    m = TorusGrauertTube(n, 0.5)
    rho = np.linspace(0, 1000, 20001)
    lam = m.eigenvalues_of_norm(rho)
    assert np.all(np.diff(lam) > 0)
    big = rho >= 100
    # 1 - ratio(t) ~ ((n - 1) / 2) / t, with 50% slack
    assert np.all(np.abs(lam[big] / rho[big] - 1) <= 1.5 * ((n - 1) / 2) / (2 * 0.5 * rho[big]))


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.01, 5000))
def test_norm_for_eigenvalue_inverts(lam):
    m = TorusGrauertTube(2, 0.5)
    rho = m.norm_for_eigenvalue(lam)
    assert models.eigenvalue(m, rho) == pytest.approx(lam, rel=1e-10)


def test_spectrum_up_to_examples():
    assert models.spectrum_up_to(CircleBundleModel.cp1(), 3.5) == [(1.0, 2), (2.0, 3), (3.0, 4)]
    t2 = TorusGrauertTube(2, 0.5)
    out = models.spectrum_up_to(t2, models.eigenvalue(t2, 1))
    assert len(out) == 1 and out[0][1] == 4 and out[0][0] == pytest.approx(0.44639, abs=1e-5)
    assert models.spectrum_up_to(t2, 1e-6) == []
    with pytest.raises(DomainError):
        models.spectrum_up_to(t2, 0)


def test_spectrum_matches_shells():
    t2 = TorusGrauertTube(2, 0.5)
    lam, mult = t2.spectrum_arrays(30.0)
    assert np.all(np.diff(lam) > 0) and np.all(lam <= 30.0)
    rho = t2.norm_for_eigenvalue(30.0)
    ref = brute_counts(2, math.floor(rho * rho) + 2)
    N = np.nonzero(ref)[0][1:]
    ref_lam = t2.eigenvalues_of_norm(np.sqrt(N))
    assert int(mult.sum()) == int(ref[N][ref_lam <= 30.0].sum())


def test_budget_refusal():
    t2 = TorusGrauertTube(2, 0.5, budget_bytes=1e4)
    with pytest.raises(ResourceError) as e:
        t2.spectrum_arrays(1e6)
    assert e.value.estimate > e.value.budget


def test_model_validation():
    with pytest.raises(ValidationError) as e:
        TorusGrauertTube(1, 0.5)
    assert e.value.field == "model.n"
    with pytest.raises(ValidationError) as e:
        TorusGrauertTube(2, -1)
    assert e.value.field == "model.eps"
    with pytest.raises(ValidationError):
        TorusGrauertTube(2, 0.5, "other")


def test_point_validation():
    p = PointX([0, 0], [0.5, 0])
    p.check_on(0.5)
    with pytest.raises(ValidationError):
        p.check_on(0.6)
    with pytest.raises(ValidationError):
        PointX([0, 0, 0], [0.5, 0])
    with pytest.raises(ValueError):
        p.x[0] = 1.0


def test_eigenfunction_log_examples():
    t2 = TorusGrauertTube(2, 0.5)
    p = PointX([0, 0], [0.5, 0])
    lm, ph = models.eigenfunction_log(t2, (1, 0), p)
    ref = -0.5 - math.log(2 * math.pi) - 0.5 * (-math.log(2) + math.log(math.pi * specfun.bessel_i(0, 1)) + math.log(2))
    assert lm == pytest.approx(ref, rel=1e-13)
    assert ph == 0.0
    for n in (2, 3):
        m = TorusGrauertTube(n, 0.5)
        q = PointX(np.arange(n) * 0.7, models.sphere_point(0.5, np.arange(1, n + 1)))
        lm0, ph0 = models.eigenfunction_log(m, np.zeros(n), q)
        ref0 = -(n / 2) * math.log(2 * math.pi) - 0.5 * (
            (n - 1) * math.log(0.5) + specfun.log_gamma(n, 0) + math.log(specfun.sphere_volume(n - 2)))
        assert lm0 == pytest.approx(ref0, rel=1e-13)
        assert ph0 == 0.0


@settings(max_examples=30, deadline=None)
@given(m=st.tuples(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9)),
       a=st.tuples(st.floats(-7, 7), st.floats(-7, 7), st.floats(-7, 7)),
       perm=st.permutations([0, 1, 2]))
def test_eigenfunction_translation_and_permutation(m, a, perm):
    model = TorusGrauertTube(3, 0.5)
    p = PointX([0.1, 0.2, 0.3], models.sphere_point(0.5, [1.0, -2.0, 0.5]))
    lm, ph = models.eigenfunction_log(model, m, p)
    lm2, ph2 = models.eigenfunction_log(model, m, p.translated(a))
    assert lm2 == lm
    dphase = math.remainder(ph2 - ph - float(np.dot(m, a)), 2 * math.pi)
    assert abs(dphase) < 1e-9
    mp = np.asarray(m)[list(perm)]
    pp = PointX(p.x[list(perm)], p.y[list(perm)])
    lm3, _ = models.eigenfunction_log(model, mp, pp)
    assert lm3 == pytest.approx(lm, rel=1e-14, abs=1e-14)


def test_parseval_bookkeeping():
    model = TorusGrauertTube(2, 0.5)
    p = PointX([0.3, 1.9], models.sphere_point(0.5, [0.6, -0.8]))
    vecs = models.lattice_vectors(2, 0, 400)
    direct = math.fsum(math.exp(2 * models.eigenfunction_log(model, m, p)[0]) for m in vecs)
    rho = np.linalg.norm(vecs, axis=1)
    vec = math.fsum(np.exp(-2 * (vecs @ p.y) - model.log_norm_sq(rho)))
    assert vec == pytest.approx(direct, rel=1e-12)


def test_orthonormality_examples():
    t2 = TorusGrauertTube(2, 0.5)
    assert models.orthonormality_residual(t2, (0, 0), (0, 0)) <= 1e-10
    assert models.orthonormality_residual(t2, (1, 0), (2, 0), grid=3) <= 1e-10
    assert models.orthonormality_residual(t2, (1, 0), (1, 0)) <= 1e-8
    assert models.orthonormality_residual(t2, (30, -17), (30, -17)) <= 1e-8
    t3 = TorusGrauertTube(3, 0.5)
    assert models.orthonormality_residual(t3, (2, 1, 0), (2, 1, 0)) <= 1e-8
    with pytest.raises(ValidationError):
        models.orthonormality_residual(t2, (1, 0), (1, 0), grid=2)
    with pytest.raises(UnsupportedError):
        models.orthonormality_residual(TorusGrauertTube(4, 0.5), (1, 0, 0, 0), (1, 0, 0, 0))


def test_sphere_rule_integrates_exponential():
    # int_{S^1_eps} e^{-<a,y>} = 2 pi eps I_0(eps |a|); int_{S^2_eps} = 4 pi eps^2 sinh(eps|a|)/(eps|a|)
    a = np.array([[3.0, 4.0]])
    v = models.log_sphere_integral(2, 0.5, a, 64)[0]
    assert v == pytest.approx(math.log(2 * math.pi * 0.5 * specfun.bessel_i(0, 2.5)), rel=1e-13)
    a3 = np.array([[1.0, 2.0, 2.0]])
    v3 = models.log_sphere_integral(3, 0.5, a3, 40)[0]
    assert v3 == pytest.approx(math.log(4 * math.pi * 0.25 * math.sinh(1.5) / 1.5), rel=1e-12)


def test_geometry_constants():
    for variant, sigma in (("grauert", 0.5), ("reeb", 1.0)):
        g = models.geometry_constants(TorusGrauertTube(2, 0.5, variant))
        assert g.sigma_p_xi == sigma
        assert "dvxi_over_dv" in g.provenance
    rng = np.random.default_rng(7)
    for n in (2, 3):
        g = models.geometry_constants(TorusGrauertTube(n, 0.5, "reeb"))
        for _ in range(100):
            p = PointX(rng.uniform(0, 6, n), models.sphere_point(0.5, rng.normal(size=n)))
            xa, xb = g.xi_at(p)
            u, w = g.reeb_at(p)
            assert abs(float(xa @ u) - 1.0) <= 1e-12
            assert np.all(xb == 0.0)
            assert np.all(w == 0.0)


@pytest.mark.parametrize("n", [2, 3])
def test_contact_density_oracle(n):
    eps = 0.5
    g = models.geometry_constants(TorusGrauertTube(n, eps, "reeb"))
    y0 = np.zeros(n)
    y0[0] = eps
    assert models.contact_density_oracle(n, eps, y0) == pytest.approx(g.dvxi_over_dv, rel=1e-13)
    rng = np.random.default_rng(3)
    for _ in range(10):
        y = models.sphere_point(eps, rng.normal(size=n))
        assert models.contact_density_oracle(n, eps, y) == pytest.approx(g.dvxi_over_dv, rel=1e-12)


def test_contact_density_n2_determinant():
    # xi ^ d xi on (e_x1, e_x2, t), t the unit sphere tangent at y = (eps, 0): det of the 3x3 minor
    eps = 0.5
    xi = np.array([-eps, 0.0, 0.0, 0.0])
    frame = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1.0]])
    omega = np.zeros((4, 4))
    omega[0, 2], omega[2, 0], omega[1, 3], omega[3, 1] = 1, -1, 1, -1
    a = frame @ xi
    b = frame @ omega @ frame.T
    val = a[0] * b[1, 2] - a[1] * b[0, 2] + a[2] * b[0, 1]
    assert abs(val) / 2 == pytest.approx(models.contact_density_oracle(2, eps, [eps, 0]), rel=1e-14)


def test_sphere_tangent_frame_orthonormal():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4):
        y = rng.normal(size=n)
        f = models.sphere_tangent_frame(y)
        assert f.shape == (n - 1, n)
        assert np.allclose(f @ f.T, np.eye(n - 1), atol=1e-14)
        assert np.allclose(f @ y, 0, atol=1e-14)


def test_circle_bundle():
    cp1, cp2 = CircleBundleModel.cp1(), CircleBundleModel.cp2()
    assert models.hilbert_multiplicity(cp1, 1) == 2
    assert models.hilbert_multiplicity(cp1, 7) == 8
    assert models.hilbert_multiplicity(cp2, 3) == 10
    assert cp2.cr_dimension == 2 and cp2.limit_constant() == 0.5
    lam, mult = cp2.spectrum_arrays(50)
    assert [int(v) for v in mult] == [math.comb(m + 2, 2) for m in range(1, 51)]
    with pytest.raises(ValidationError):
        CircleBundleModel((1, 0))
    with pytest.raises(ValidationError):
        CircleBundleModel((Fraction(1, 3), Fraction(1, 3))).spectrum_arrays(5)


def test_csv_exports(tmp_path):
    t2 = TorusGrauertTube(2, 0.5)
    n = models.write_spectrum_csv(tmp_path / "s.csv", t2, 10)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "lambda,multiplicity" and len(lines) == n + 1
    vals = [float(l.split(",")[0]) for l in lines[1:]]
    assert vals == sorted(vals)
    models.write_shell_csv(tmp_path / "h.csv", t2, 3)
    assert (tmp_path / "h.csv").read_text().splitlines()[:2] == ["norm_sq,count,lambda", "1,4," + format(
        models.eigenvalue(t2, 1), ".17g")]
