from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toeplab import io, quadrature
from toeplab.errors import DomainError


def test_gauss_legendre_exact_for_polynomials():
    x, w = quadrature.gauss_legendre(10)
    for p in range(20):
        assert math.fsum(w * x ** p) == pytest.approx(1 / (p + 1), rel=1e-13)


def test_integrate_smooth_and_peaked():
    assert quadrature.integrate(np.sin, 0, math.pi) == pytest.approx(2.0, rel=1e-13)
    assert quadrature.integrate(lambda t: np.exp(-1e4 * (t - 0.3) ** 2), 0, 1) == pytest.approx(
        math.sqrt(math.pi) / 100, rel=1e-11)


def test_integrate_orientation_and_empty():
    assert quadrature.integrate(np.cos, 1, 0) == pytest.approx(-math.sin(1), rel=1e-13)
    assert quadrature.integrate(np.cos, 2, 2) == 0.0
    with pytest.raises(DomainError):
        quadrature.integrate(np.cos, 0, math.inf)


def test_composite_rule_weights_sum_to_length():
    x, w = quadrature.composite_rule(-1.0, 3.0, 7, 12)
    assert math.fsum(w) == pytest.approx(4.0, rel=1e-14)
    assert x.min() > -1.0 and x.max() < 3.0


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integrate_additive(a, b):
    f = lambda t: np.exp(np.sin(3 * t))
    whole = quadrature.integrate(f, a, b)
    m = 0.5 * (a + b)
    parts = quadrature.integrate(f, a, m) + quadrature.integrate(f, m, b)
    assert whole == pytest.approx(parts, rel=1e-11, abs=1e-12)


def test_fmt_17_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(np.int64(12)) == "12"
    assert float(io.fmt(math.pi)) == math.pi


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "s.csv"
    n = io.write_csv(p, ["k", "value"], [(1.0, 1 / 3), (2.0, 2 / 3)])
    assert n == 2
    assert p.read_text().splitlines()[0] == "k,value"
    assert io.read_series_csv(p) == [(1.0, 1 / 3), (2.0, 2 / 3)]


def test_dumps_canonical():
    s = io.dumps({"b": np.float64(1.5), "a": [np.int32(2), float("inf"), float("nan")], "c": np.bool_(True)})
    assert s == io.dumps(json.loads(s))
    d = json.loads(s)
    assert list(d) == ["a", "b", "c"]
    assert d["a"] == [2, "inf", "nan"]
    assert d["c"] is True
