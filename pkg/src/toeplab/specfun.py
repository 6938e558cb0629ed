"""The gamma_n family, modified Bessel series, and sphere volumes.

    gamma_n(t) = int_0^pi exp(t cos a) sin(a)^(n-2) da

grows like e^t, so everything is evaluated through the scaled integrand
exp(t (cos a - 1)), which never exceeds 1, and the prefactor e^t is carried
in log form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import DomainError, RangeError, ValidationError

LOG_FLOAT_MAX = math.log(np.finfo(float).max)
# exp(-745) underflows to zero; the scaled integrand is dropped beyond it.
_TAIL_EXPONENT = 745.0
# Largest t for which the I_nu power series is summed directly.
BESSEL_T_MAX = 700.0

_BULK_PANELS = 16
_BULK_ORDER = 20


def _check_n(n: int) -> None:
    if int(n) != n or n < 2:
        raise DomainError(f"gamma_n requires an integer n >= 2, got {n!r}")


def _cutoff_angle(t: float) -> float:
    if t <= _TAIL_EXPONENT / 2.0:
        return math.pi
    return math.acos(1.0 - _TAIL_EXPONENT / t)


def _scaled_integral(n: int, t: float, weight: str = "one") -> float:
    """int_0^pi w(a) exp(t (cos a - 1)) sin^(n-2) a da for t >= 0.

    ``weight`` selects w: "one", "cos", or "versine" (1 - cos a, written as
    2 sin^2(a/2) so that it keeps full relative precision near a = 0).
    """
    p = n - 2

    if weight == "one":
        def f(a):
            return np.exp(t * (np.cos(a) - 1.0)) * np.sin(a) ** p
    elif weight == "cos":
        def f(a):
            return np.cos(a) * np.exp(t * (np.cos(a) - 1.0)) * np.sin(a) ** p
    elif weight == "versine":
        def f(a):
            return 2.0 * np.sin(0.5 * a) ** 2 * np.exp(-2.0 * t * np.sin(0.5 * a) ** 2) * np.sin(a) ** p
    else:
        raise ValueError(weight)

    return quadrature.integrate(f, 0.0, _cutoff_angle(t))


def log_gamma(n: int, t: float) -> float:
    """log gamma_n(t) for t >= 0, finite for every finite t."""
    _check_n(n)
    if t < 0:
        raise DomainError(f"log_gamma requires t >= 0, got {t!r}")
    return t + math.log(_scaled_integral(n, float(t)))


def gamma(n: int, t: float) -> float:
    """gamma_n(t); even in t. Raises RangeError instead of returning inf."""
    _check_n(n)
    lg = log_gamma(n, abs(float(t)))
    if lg > LOG_FLOAT_MAX:
        raise RangeError(
            f"gamma_{n}({t}) overflows double precision; use log_gamma or gamma_ratio"
        )
    return math.exp(lg)


def gamma_ratio(n: int, t: float) -> float:
    """gamma_n'(t) / gamma_n(t), in [0, 1) for t >= 0."""
    _check_n(n)
    if t < 0:
        raise DomainError(f"gamma_ratio requires t >= 0, got {t!r}")
    t = float(t)
    return 1.0 - gamma_ratio_complement(n, t)


def gamma_ratio_complement(n: int, t: float) -> float:
    """1 - gamma_n'(t)/gamma_n(t), computed without cancellation."""
    _check_n(n)
    if t < 0:
        raise DomainError(f"gamma_ratio requires t >= 0, got {t!r}")
    t = float(t)
    return _scaled_integral(n, t, "versine") / _scaled_integral(n, t, "one")


def gamma_prime(n: int, t: float) -> float:
    """Derivative of gamma_n, by differentiating under the integral sign."""
    _check_n(n)
    if t < 0:
        return -gamma_prime(n, -t)
    return gamma_ratio(n, t) * gamma(n, t)


def gamma_bulk(n: int, t) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (log gamma_n(t), 1 - gamma_n'(t)/gamma_n(t)) for an array of t >= 0.

    Uses a fixed composite Gauss-Legendre rule on the non-negligible part of
    [0, pi]; tests pin it against the adaptive scalar routines.
    """
    _check_n(n)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise DomainError("gamma_bulk requires t >= 0")
    p = n - 2
    x, w = quadrature.composite_rule(0.0, 1.0, _BULK_PANELS, _BULK_ORDER)
    amax = np.where(
        t <= _TAIL_EXPONENT / 2.0,
        math.pi,
        np.arccos(1.0 - _TAIL_EXPONENT / np.maximum(t, _TAIL_EXPONENT / 2.0)),
    )
    log_out = np.empty_like(t)
    comp_out = np.empty_like(t)
    chunk = 4096
    for s in range(0, t.size, chunk):
        tt = t[s:s + chunk, None]
        a = amax[s:s + chunk, None] * x[None, :]
        h = amax[s:s + chunk]
        half = np.sin(0.5 * a) ** 2
        base = np.exp(-2.0 * tt * half) * np.sin(a) ** p
        # row-wise reductions, so a value never depends on its batch (BLAS gemv can)
        s0 = h * (base * w).sum(axis=1)
        s1 = h * (2.0 * half * base * w).sum(axis=1)
        log_out[s:s + chunk] = t[s:s + chunk] + np.log(s0)
        comp_out[s:s + chunk] = s1 / s0
    return log_out, comp_out


def gamma_series(n: int, t: float) -> float:
    """Closed series for gamma_n.

    Odd n: 2^(n-1) ((n-1)/2 - 1)! sum_j ((n-1)/2 + j)! t^(2j) / (j! (n-1+2j)!).
    Even n: sqrt(pi) Gamma((n-1)/2) (2/t)^((n-2)/2) I_((n-2)/2)(t), i.e. twice the
    commonly printed pi (n-2)! / (2^(n-1) (n/2-1)!) sum_j (t/2)^(2j) / (j! (j+(n-2)/2)!).
    """
    _check_n(n)
    t = abs(float(t))
    if n % 2 == 0:
        nu = (n - 2) // 2
        # (2/t)^nu I_nu(t) = sum_j (t/2)^(2j) / (j! (j+nu)!)
        total, term, j = 0.0, 1.0 / math.factorial(nu), 0
        terms = []
        while True:
            terms.append(term)
            j += 1
            term *= (t / 2.0) ** 2 / (j * (j + nu))
            if term < 1e-17 * math.fsum(terms) or j > 10_000:
                break
        total = math.fsum(terms)
        return math.sqrt(math.pi) * math.gamma((n - 1) / 2.0) * total
    h = (n - 1) // 2
    log_pref = (n - 1) * math.log(2.0) + math.lgamma(h)
    terms = []
    j = 0
    while True:
        if t == 0.0 and j > 0:
            break
        lt = math.lgamma(h + j + 1) - math.lgamma(j + 1) - math.lgamma(n + 2 * j)
        lt += 2 * j * math.log(t) if j else 0.0
        term = math.exp(log_pref + lt)
        terms.append(term)
        if term < 1e-17 * math.fsum(terms) and j > t:
            break
        j += 1
    return math.fsum(terms)


def bessel_i(nu: int, t: float) -> float:
    """Modified Bessel function I_nu(t) by its power series.

    Raises:
        RangeError: for t > BESSEL_T_MAX; ratios and logs of gamma_n cover
            that regime without overflow.
    """
    if int(nu) != nu or nu < 0:
        raise DomainError(f"bessel_i requires an integer order nu >= 0, got {nu!r}")
    if t < 0:
        raise DomainError(f"bessel_i requires t >= 0, got {t!r}")
    if t > BESSEL_T_MAX:
        raise RangeError(
            f"bessel_i: t={t} exceeds BESSEL_T_MAX={BESSEL_T_MAX}; "
            "use gamma_ratio / log_gamma for ratios and logarithms"
        )
    nu = int(nu)
    if t == 0.0:
        return 1.0 if nu == 0 else 0.0
    q = (t / 2.0) ** 2
    term = math.exp(nu * math.log(t / 2.0) - math.lgamma(nu + 1))
    terms = [term]
    j = 0
    while True:
        j += 1
        term *= q / (j * (j + nu))
        terms.append(term)
        if term < 1e-16 * math.fsum(terms):
            break
    return math.fsum(terms)


def sphere_volume(j: int) -> float:
    """Surface measure of the unit j-sphere in R^(j+1)."""
    if int(j) != j or j < 0:
        raise DomainError(f"sphere_volume requires an integer j >= 0, got {j!r}")
    return 2.0 * math.pi ** ((j + 1) / 2.0) / math.gamma((j + 1) / 2.0)


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _exp_profile(t: np.ndarray, d1: float, d2: float) -> np.ndarray:
    return np.exp(-1.0 / ((t - d1) * (d2 - t)))


# Smooth profiles on the open support, keyed by id. Each receives points
# strictly inside (d1, d2); the bump sets everything else to exactly zero.
PROFILES = {"exp": _exp_profile}


def register_profile(name: str, func) -> None:
    """Add a profile; it must be smooth, nonnegative and flat at both endpoints."""
    if name in PROFILES:
        raise ValueError(f"profile {name!r} is already registered")
    PROFILES[name] = func


@dataclass(frozen=True)
class BumpFunction:
    """Compactly supported smooth test function on (delta1, delta2).

    ``scale`` multiplies the profile, so experiments can use c*chi directly.
    """

    delta1: float
    delta2: float
    profile: str = "exp"
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.delta1) and math.isfinite(self.delta2)):
            raise ValidationError("support endpoints must be finite", "chi")
        if not 0 < self.delta1:
            raise ValidationError(f"must be > 0, got {self.delta1}", "chi.delta1")
        if not self.delta1 < self.delta2:
            raise ValidationError(
                f"must be < delta2={self.delta2}, got {self.delta1}", "chi.delta1"
            )
        if self.profile not in PROFILES:
            raise ValidationError(
                f"unknown profile {self.profile!r}; known: {sorted(PROFILES)}", "chi.profile"
            )
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"must be a positive finite number, got {self.scale}", "chi.scale")

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = (t > self.delta1) & (t < self.delta2)
        if np.any(inside):
            out[inside] = self.scale * PROFILES[self.profile](t[inside], self.delta1, self.delta2)
        return out if out.ndim else float(out)

    def squared(self, t):
        v = self.eval(t)
        return v * v

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.delta1 + self.delta2)


def bump_moment(chi: BumpFunction, p: int, squared: bool = False, rtol: float = 1e-10) -> float:
    """int t^p chi(t) dt, or int t^p chi(t)^2 dt when ``squared``."""
    if int(p) != p or p < 0:
        raise DomainError(f"moment order must be an integer >= 0, got {p!r}")
    g = chi.squared if squared else chi.eval

    def f(t):
        return t ** p * g(t)

    return quadrature.integrate(f, chi.delta1, chi.delta2, rtol=rtol)
