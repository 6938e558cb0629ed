"""The kernel of chi(T/k) on the torus tube as an exact finite mode sum.

    K_k(p, q) = sum_m w_m s_m(p) conj(s_m(q)),   w_m = chi(lambda_m / k)

Every sum is accumulated in log scale: each term's exponent is shifted by the
largest one before exponentiating, then summed with math.fsum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import ResourceError, ValidationError
from .models import PointX, TorusGrauertTube
from .specfun import BumpFunction, ball_volume

DEFAULT_SEPARATION_FLOOR = 0.1
# bytes per materialized mode: n int64 coordinates plus four float arrays
_BYTES_PER_MODE = 8 * 8


@dataclass(frozen=True)
class ModeFrame:
    """Modes m with lambda_m / k inside the support of chi.

    ``log_norm`` is -log of the squared normalizer of s_m, so that
    log |s_m(p)|^2 = -2 <m, y> + log_norm. With ``contact_volume`` the
    eigenfunctions are renormalized to the contact volume dV_xi.
    """

    model: TorusGrauertTube
    chi: BumpFunction
    k: float
    squared: bool
    contact_volume: bool
    modes: np.ndarray
    lam: np.ndarray
    weight: np.ndarray
    log_norm: np.ndarray

    def __len__(self) -> int:
        return self.modes.shape[0]

    @property
    def empty(self) -> bool:
        return len(self) == 0

    @property
    def d(self) -> int:
        return self.model.cr_dimension


def estimate_modes(model: TorusGrauertTube, chi: BumpFunction, k: float) -> float:
    lo = model.norm_for_eigenvalue(k * chi.delta1)
    hi = model.norm_for_eigenvalue(k * chi.delta2)
    return ball_volume(model.n) * max(hi**model.n - lo**model.n, 0.0) + 1.0


def build_frame(model: TorusGrauertTube, chi: BumpFunction, k: float, squared: bool = False,
                contact_volume: bool = False) -> ModeFrame:
    if not (math.isfinite(k) and k >= 1):
        raise ValidationError(f"must be >= 1, got {k!r}", "k")
    est = estimate_modes(model, chi, k)
    if est * _BYTES_PER_MODE * model.n > model.budget_bytes:
        raise ResourceError(
            f"frame at k={k} would hold about {est:.3g} modes "
            f"({est * _BYTES_PER_MODE * model.n / 2**20:.0f} MiB), over the budget "
            f"of {model.budget_bytes / 2**20:.0f} MiB",
            estimate=est,
            budget=model.budget_bytes,
        )
    N, _, lam, log_norm_sq = model.shell_window(k * chi.delta1, k * chi.delta2)
    n = model.n
    if N.size == 0:
        z = np.zeros(0)
        return ModeFrame(model, chi, float(k), squared, contact_volume,
                         np.zeros((0, n), dtype=np.int64), z, z, z)
    modes = models.lattice_vectors(n, int(N[0]), int(N[-1]))
    sq = (modes * modes).sum(axis=1)
    idx = np.searchsorted(N, sq)
    ok = (idx < N.size) & (N[np.minimum(idx, N.size - 1)] == sq)
    modes, idx = modes[ok], idx[ok]
    shell_log_norm = -log_norm_sq
    if contact_volume:
        shell_log_norm = shell_log_norm - math.log(models.geometry_constants(model).dvxi_over_dv)
    w = chi.eval(lam / k)
    if squared:
        w = w * w
    return ModeFrame(model, chi, float(k), squared, contact_volume,
                     modes, lam[idx], w[idx], shell_log_norm[idx])


def _log_weights(frame: ModeFrame) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(frame.weight)


def log_sum(exponents: np.ndarray, coeff: np.ndarray | None = None) -> tuple[float, float]:
    """(shift, total) with sum coeff * exp(exponents) = total * exp(shift)."""
    if exponents.size == 0:
        return 0.0, 0.0
    mx = float(np.max(exponents))
    if not math.isfinite(mx):
        return 0.0, 0.0
    terms = np.exp(exponents - mx)
    if coeff is not None:
        terms = terms * coeff
    return mx, math.fsum(terms)


def _diag_exponents(frame: ModeFrame, p: PointX) -> np.ndarray:
    return _log_weights(frame) + frame.log_norm - 2.0 * (frame.modes @ p.y)


def _check_point(frame: ModeFrame, p: PointX) -> None:
    if p.n != frame.model.n:
        raise ValidationError(f"point has {p.n} components, model has n={frame.model.n}", "point")
    p.check_on(frame.model.eps)


def kernel_eval(frame: ModeFrame, p: PointX, q: PointX) -> complex:
    _check_point(frame, p)
    _check_point(frame, q)
    if frame.empty:
        return 0j
    e = _log_weights(frame) + frame.log_norm - frame.modes @ (p.y + q.y)
    ph = frame.modes @ (p.x - q.x)
    mx, re = log_sum(e, np.cos(ph))
    _, im = log_sum(e, np.sin(ph))
    return complex(re * math.exp(mx), im * math.exp(mx))


def log_kernel_abs(frame: ModeFrame, p: PointX, q: PointX) -> float:
    """log |K_k(p, q)|, finite even when |K| is far below the float range."""
    e = _log_weights(frame) + frame.log_norm - frame.modes @ (p.y + q.y)
    ph = frame.modes @ (p.x - q.x)
    mx, re = log_sum(e, np.cos(ph))
    _, im = log_sum(e, np.sin(ph))
    mag = math.hypot(re, im)
    return mx + math.log(mag) if mag > 0 else -math.inf


def diag_moment(frame: ModeFrame, p: PointX, coeff: np.ndarray | None = None) -> float:
    """sum_m w_m coeff_m |s_m(p)|^2 (coeff = 1 gives the kernel diagonal)."""
    _check_point(frame, p)
    if frame.empty:
        return 0.0
    mx, tot = log_sum(_diag_exponents(frame, p), coeff)
    return tot * math.exp(mx)


def log_diag(frame: ModeFrame, p: PointX) -> float:
    mx, tot = log_sum(_diag_exponents(frame, p))
    return mx + math.log(tot) if tot > 0 else -math.inf


def kernel_diag(frame: ModeFrame, p: PointX) -> float:
    return diag_moment(frame, p)


def _frames(model, chi, ks, squared=False, contact_volume=False):
    ks = [float(k) for k in ks]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError("ks must be strictly ascending", "ks")
    for k in ks:
        yield k, build_frame(model, chi, k, squared, contact_volume)


def diag_series(model, chi, p: PointX, ks, contact_volume: bool = False) -> list[tuple[float, float]]:
    """(k, k^-(d+1) K_k(p, p))."""
    d = model.cr_dimension
    return [(k, kernel_diag(f, p) / k ** (d + 1)) for k, f in _frames(model, chi, ks, False, contact_volume)]


def weighted_diag(frame: ModeFrame, p: PointX, power: int) -> float:
    """sum_m lambda_m^power w_m |s_m(p)|^2."""
    if int(power) != power or power < 0:
        raise ValidationError(f"must be an integer >= 0, got {power!r}", "power")
    if power == 0:
        return kernel_diag(frame, p)
    return diag_moment(frame, p, frame.lam ** int(power))


def weighted_diag_series(model, chi, p: PointX, power: int, ks) -> list[tuple[float, float]]:
    """Raw (k, sum lambda^power chi(lambda/k) |s_m(p)|^2)."""
    return [(k, weighted_diag(f, p, power)) for k, f in _frames(model, chi, ks)]


def separation(p: PointX, q: PointX) -> float:
    """Distance in the product metric (wrapped torus angles, chordal sphere distance)."""
    dx = np.mod(p.x - q.x + math.pi, 2 * math.pi) - math.pi
    dy = p.y - q.y
    return float(math.sqrt(float(dx @ dx + dy @ dy)))


def log_correlation(frame: ModeFrame, p: PointX, q: PointX) -> float:
    """log of |K(p,q)| / sqrt(K(p,p) K(q,q)), always <= 0 up to rounding."""
    _check_point(frame, p)
    _check_point(frame, q)
    if frame.empty:
        return -math.inf
    v = log_kernel_abs(frame, p, q) - 0.5 * (log_diag(frame, p) + log_diag(frame, q))
    return min(v, 0.0)


def correlation(frame: ModeFrame, p: PointX, q: PointX) -> float:
    return math.exp(log_correlation(frame, p, q))


def offdiag_decay(model, chi, p: PointX, q: PointX, ks,
                  floor: float = DEFAULT_SEPARATION_FLOOR) -> list[tuple[float, float]]:
    """(k, normalized correlation) for a pair at least ``floor`` apart."""
    sep = separation(p, q)
    if sep < floor:
        raise ValidationError(
            f"points are {sep:.3g} apart, below the separation floor {floor}", "points"
        )
    return [(k, correlation(f, p, q)) for k, f in _frames(model, chi, ks)]


def offdiag_log_series(model, chi, p, q, ks, floor=DEFAULT_SEPARATION_FLOOR):
    """Like offdiag_decay but returns the natural log of the correlation."""
    sep = separation(p, q)
    if sep < floor:
        raise ValidationError(
            f"points are {sep:.3g} apart, below the separation floor {floor}", "points"
        )
    return [(k, log_correlation(f, p, q)) for k, f in _frames(model, chi, ks)]


def reeb_derivative_terms(frame: ModeFrame, p: PointX) -> tuple[float, float]:
    """(Re, Im) of sum_m w_m conj(s_m) (R s_m)(p).

    R s_m = -(i/eps^2) <m, y> s_m, so the real part is identically zero.
    """
    coeff = -(frame.modes @ p.y) / frame.model.eps**2
    return 0.0, diag_moment(frame, p, coeff)


def reeb_derivative_diag(frame: ModeFrame, p: PointX) -> float:
    if frame.empty:
        raise ValidationError("frame is empty; k is below the first eigenvalue in the window", "k")
    return reeb_derivative_terms(frame, p)[1]


def sphere_derivative_terms(frame: ModeFrame, p: PointX, w) -> tuple[float, float]:
    """(Re, Im) of sum w_m conj(s_m) (W s_m)(p) for a sphere-tangent W.

    W s_m = -<m, w> s_m is a real multiple, so the imaginary part is zero.
    """
    coeff = -(frame.modes @ np.asarray(w, dtype=float))
    return diag_moment(frame, p, coeff), 0.0


def trace_consistency(model: TorusGrauertTube, chi: BumpFunction, k: float,
                      grid: tuple[int, int] | None = None) -> dict:
    """Integral of the kernel diagonal over X versus the eigenvalue sum.

    The torus factor uses a trapezoid rule with ``grid[0]`` points per
    dimension (the diagonal has no x dependence, so any grid is exact); the
    sphere factor uses the circle or sphere rule with ``grid[1]`` nodes.
    """
    from .spectral import trace_chi

    frame = build_frame(model, chi, k)
    direct = trace_chi(model, chi, k)
    if frame.empty:
        return {"k": float(k), "quadrature": 0.0, "direct": direct, "residual": abs(direct), "relative": 0.0,
                "grid": None}
    rho_max = float(np.sqrt((frame.modes**2).sum(axis=1).max()))
    torus_n, sphere_n = grid if grid else (4, models.default_sphere_nodes(model.eps, 2 * rho_max, model.n))
    pts, w = models.sphere_rule(model.n, model.eps, sphere_n)
    lw = _log_weights(frame) + frame.log_norm
    # log of the diagonal at every sphere node, in chunks of nodes
    logs = np.empty(len(pts))
    for s in range(0, len(pts), 16):
        e = lw[None, :] - 2.0 * (pts[s:s + 16] @ frame.modes.T)
        mx = e.max(axis=1, keepdims=True)
        logs[s:s + 16] = mx[:, 0] + np.log(np.exp(e - mx).sum(axis=1))
    # trapezoid weights over the torus grid, each multiplying the same diagonal value
    torus_weight = math.fsum([(2 * math.pi / torus_n) ** model.n] * torus_n**model.n)
    mx = logs.max()
    quad = torus_weight * math.exp(mx) * math.fsum(w * np.exp(logs - mx))
    res = abs(quad - direct)
    return {
        "k": float(k),
        "quadrature": quad,
        "direct": direct,
        "residual": res,
        "relative": res / abs(direct) if direct else res,
        "grid": [int(torus_n), int(sphere_n)],
    }


def kernel_probe(model, chi, p: PointX, q: PointX, ks) -> dict:
    vals = []
    norm = []
    for k, f in _frames(model, chi, ks):
        vals.append(kernel_eval(f, p, q))
        norm.append(correlation(f, p, q))
    return {
        "point_p": p.as_dict(),
        "point_q": q.as_dict(),
        "ks": [float(k) for k in ks],
        "values_re": [v.real for v in vals],
        "values_im": [v.imag for v in vals],
        "normalized": norm,
    }
