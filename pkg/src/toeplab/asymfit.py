"""Power-law fits, Richardson extrapolation and convergence-order estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class FitResult:
    exponent: float
    coefficient: float
    r_squared: float
    residuals: tuple

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "r_squared": self.r_squared,
            "residuals": list(self.residuals),
        }


def _unzip(series) -> tuple[np.ndarray, np.ndarray]:
    pts = list(series)
    k = np.array([float(a) for a, _ in pts])
    v = np.array([float(b) for _, b in pts])
    return k, v


def fit_power(series) -> FitResult:
    """Least squares v ~ C k^p on (log k, log v).

    Residuals are relative deviations v_i / (C k_i^p) - 1.
    """
    k, v = _unzip(series)
    if k.size < 3:
        raise DomainError(f"fit_power needs at least 3 points, got {k.size}")
    if np.any(np.diff(k) <= 0) or np.any(k <= 0):
        raise DomainError("k values must be positive and strictly increasing")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError("fit_power needs positive finite values; fit |v| or shift the series")
    x = np.log(k)
    y = np.log(v)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    pred = intercept + slope * x
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    resid = tuple(float(r) for r in np.expm1(y - pred))
    return FitResult(slope, float(math.exp(intercept)), r2, resid)


def richardson(series, order: float) -> float:
    """Limit of v_k = L + C k^-order + ..., by repeated two-point elimination.

    Successive pairs give extrapolants; the last one is returned.
    """
    if not order > 0:
        raise DomainError(f"assumed order must be > 0, got {order!r}")
    k, v = _unzip(series)
    if k.size < 2:
        raise DomainError("richardson needs at least 2 points")
    if np.unique(k).size != k.size:
        raise DomainError("richardson needs distinct k values")
    out = v[-1]
    for i in range(k.size - 1):
        r = (k[i + 1] / k[i]) ** order
        if r == 1.0:
            raise DomainError("identical k values")
        out = (r * v[i + 1] - v[i]) / (r - 1.0)
    return float(out)


def order_estimate(series, rtol: float = 1e-9) -> float:
    """Convergence order p from the last three values of a geometric ladder.

    With ratio q between consecutive k and differences D_i = v_{i+1} - v_i,
    D_i / D_{i+1} = q^p. Returns +inf when the series is constant.
    """
    k, v = _unzip(series)
    if k.size < 3:
        raise DomainError("order_estimate needs at least 3 points")
    q = k[1:] / k[:-1]
    if not np.allclose(q, q[0], rtol=rtol):
        raise DomainError("order_estimate needs geometric k spacing")
    d1 = v[-2] - v[-3]
    d2 = v[-1] - v[-2]
    scale = max(np.max(np.abs(v)), 1e-300)
    if abs(d1) <= 1e-15 * scale and abs(d2) <= 1e-15 * scale:
        return math.inf
    if d2 == 0.0:
        return math.inf
    ratio = d1 / d2
    if ratio <= 0:
        raise DomainError("series is not monotonically converging; order undefined")
    return float(math.log(ratio) / math.log(q[0]))


def write_fit_json(path, fit: FitResult) -> None:
    from .io import write_json

    write_json(path, fit.as_dict())
