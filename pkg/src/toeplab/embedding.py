"""Kodaira-type maps F_k(p) = c_k (chi(lambda_m/k) s_m(p))_m on the torus tube.

F_k is never materialized for norms and pairings: every Hermitian quantity
is a weighted mode sum over a squared frame (weights eta = chi^2). The
derivative of s_m along a torus direction u is i<m,u> s_m and along a
sphere-tangent direction w it is -<m,w> s_m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ResourceError, ThresholdError, ValidationError
from .kernels import ModeFrame, build_frame
from .models import PointX, TorusGrauertTube, geometry_constants
from .specfun import BumpFunction, bump_moment

SCALINGS = ("plain", "rescaled", "sphere-normalized")
EXPORT_ROW_CAP = 10**6
TANGENT_TOL = 1e-12


class ThresholdWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    scaling: str = "rescaled"
    variant: str = "reeb"

    def __post_init__(self):
        if self.scaling not in SCALINGS:
            raise ValidationError(f"must be one of {SCALINGS}, got {self.scaling!r}", "embedding.scaling")
        if self.variant not in ("grauert", "reeb"):
            raise ValidationError(f"must be grauert or reeb, got {self.variant!r}", "embedding.operator_variant")


@dataclass(frozen=True)
class OneFormValue:
    """Torus components a (dx parts) and sphere-frame components b at ``point``."""

    a: np.ndarray
    b: np.ndarray
    point: PointX | None = field(default=None, compare=False)

    def __call__(self, v: "TangentVector") -> float:
        from .models import sphere_tangent_frame

        frame = sphere_tangent_frame(v.base.y)
        return float(self.a @ v.u + self.b @ (frame @ v.w))


@dataclass(frozen=True)
class TangentVector:
    base: PointX
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        n = self.base.n
        if u.size != n or w.size != n:
            raise ValidationError(f"u and w need {n} components", "tangent")
        y = self.base.y
        if abs(float(w @ y)) > TANGENT_TOL * max(np.linalg.norm(w) * np.linalg.norm(y), 1e-300):
            raise ValidationError("w is not tangent to the sphere at the base point", "tangent.w")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)

    @classmethod
    def reeb(cls, p: PointX, eps: float) -> "TangentVector":
        return cls(p, -p.y / eps**2, np.zeros(p.n))


def frame_for(model: TorusGrauertTube, chi: BumpFunction, k: float, cfg: EmbeddingConfig) -> ModeFrame:
    """Squared frame in the normalization the config asks for.

    The reeb variant uses eigenfunctions normalized to the contact volume.
    """
    if model.variant != cfg.variant:
        raise ValidationError(
            f"model variant {model.variant!r} differs from embedding variant {cfg.variant!r}",
            "embedding.operator_variant",
        )
    return build_frame(model, chi, k, squared=True, contact_volume=(cfg.variant == "reeb"))


def _check(frame: ModeFrame, cfg: EmbeddingConfig) -> None:
    if not frame.squared:
        raise ValidationError("embedding quantities need a frame built with squared=True", "frame")
    if frame.model.variant != cfg.variant:
        raise ValidationError("frame and config use different operator variants", "embedding.operator_variant")


def scale_sq(frame: ModeFrame, cfg: EmbeddingConfig) -> float:
    """Square of the constant factor in front of F_k."""
    if cfg.scaling == "plain":
        return 1.0
    d = frame.d
    s = 2.0 * math.pi ** (d + 1) / frame.k ** (d + 1)
    if cfg.scaling == "sphere-normalized":
        s /= bump_moment(frame.chi, d, squared=True)
    return s


def _moment(frame: ModeFrame, p: PointX, coeff=None) -> float:
    if frame.empty:
        return 0.0
    return kernels.diag_moment(frame, p, coeff)


def embed_norm_sq(frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> float:
    """|F_k(p)|^2."""
    _check(frame, cfg)
    if frame.empty:
        warnings.warn(f"empty frame at k={frame.k}: threshold not reached", ThresholdWarning)
        return 0.0
    return scale_sq(frame, cfg) * kernels.kernel_diag(frame, p)


def _direction_coeff(frame: ModeFrame, v: TangentVector) -> np.ndarray:
    # d s_m (v) = (i <m,u> - <m,w>) s_m
    return 1j * (frame.modes @ v.u) - (frame.modes @ v.w)


def differential(frame: ModeFrame, cfg: EmbeddingConfig, v: TangentVector,
                 v2: TangentVector | None = None):
    """|dF_k v|^2, or the Hermitian pairing <dF_k v, dF_k v2> when v2 is given."""
    _check(frame, cfg)
    if frame.empty:
        return 0.0 if v2 is None else 0j
    kernels._check_point(frame, v.base)
    c1 = _direction_coeff(frame, v)
    s = scale_sq(frame, cfg)
    if v2 is None:
        return s * _moment(frame, v.base, (c1 * np.conj(c1)).real)
    if not (np.array_equal(v.base.x, v2.base.x) and np.array_equal(v.base.y, v2.base.y)):
        raise ValidationError("pairing needs two vectors at the same base point", "tangent")
    prod = c1 * np.conj(_direction_coeff(frame, v2))
    return complex(s * _moment(frame, v.base, prod.real), s * _moment(frame, v.base, prod.imag))


def pullback_omega(frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> OneFormValue:
    """F_k^* (alpha / g) with alpha = Im sum conj(z) dz and g = sum lambda |z|^2.

    The scaling cancels between numerator and denominator.
    """
    _check(frame, cfg)
    if frame.empty:
        raise ThresholdError(f"empty frame at k={frame.k}; the weighted norm vanishes")
    kernels._check_point(frame, p)
    den = _moment(frame, p, frame.lam)
    if not den > 0:
        raise ThresholdError(f"weighted norm is {den} at k={frame.k}")
    n = frame.model.n
    a = np.empty(n)
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        coeff = _direction_coeff(frame, TangentVector(p, e, np.zeros(n)))
        a[l] = _moment(frame, p, coeff.imag) / den
    from .models import sphere_tangent_frame

    b = np.empty(n - 1)
    for j, t in enumerate(sphere_tangent_frame(p.y)):
        coeff = _direction_coeff(frame, TangentVector(p, np.zeros(n), t))
        b[j] = _moment(frame, p, coeff.imag) / den
    return OneFormValue(a, b, p)


def reeb_pairing(omega: OneFormValue, eps: float) -> float:
    p = omega.point
    return float(omega.a @ (-p.y / eps**2))


def pullback_deviation(frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> dict:
    """Componentwise distance from the pullback form to sigma_P(xi)^-1 xi.

    Both global signs of xi are tried; the sign giving the smaller distance
    is reported.
    """
    om = pullback_omega(frame, cfg, p)
    g = geometry_constants(frame.model)
    xa, xb = g.xi_at(p)
    target_a, target_b = xa / g.sigma_p_xi, xb / g.sigma_p_xi
    best = None
    for sign in (1.0, -1.0):
        dev = max(np.max(np.abs(om.a - sign * target_a)), np.max(np.abs(om.b - sign * target_b), initial=0.0))
        if best is None or dev < best[0]:
            best = (float(dev), sign)
    return {
        "deviation": best[0],
        "sign": best[1],
        "dx": om.a.tolist(),
        "sphere": om.b.tolist(),
        "reeb_pairing": reeb_pairing(om, frame.model.eps),
    }


def equivariance_metrics(frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> tuple[float, float, float]:
    """(a, b, c) = (|k^-1 dF R|^2, |k^-1 T F|^2, |k^-1 (T F - dF R)|^2)."""
    _check(frame, cfg)
    if cfg.variant != "reeb" or not frame.contact_volume:
        raise ValidationError("equivariance needs the reeb variant with contact-volume normalization",
                              "embedding.operator_variant")
    if frame.empty:
        raise ThresholdError(f"empty frame at k={frame.k}")
    eps = frame.model.eps
    s = scale_sq(frame, cfg)
    my = (frame.modes @ p.y) / eps**2
    a = _moment(frame, p, my * my) * s / frame.k**2
    # the same expression as weighted_diag(power=2) * scale^2 / k^2
    b = kernels.weighted_diag(frame, p, 2) * s / frame.k**2
    c = _moment(frame, p, (frame.lam + my) ** 2) * s / frame.k**2
    return a, b, c


def moment_constant(model: TorusGrauertTube, chi: BumpFunction, shift: int = 0) -> float:
    """int t^(d+2+shift) chi(t)^2 dt, the limit of a and b (shift=1 gives the other index reading)."""
    return bump_moment(chi, model.cr_dimension + 2 + shift, squared=True)


def equivariance_series(model: TorusGrauertTube, chi: BumpFunction, p: PointX, ks,
                        cfg: EmbeddingConfig | None = None) -> list[dict]:
    """Per k: a, b, c and the deviations |a - C'|, |b - C'|."""
    cfg = cfg or EmbeddingConfig("rescaled", "reeb")
    cp = moment_constant(model, chi)
    rows = []
    for k in ks:
        a, b, c = equivariance_metrics(frame_for(model, chi, k, cfg), cfg, p)
        rows.append({"k": float(k), "a": a, "b": b, "c": c, "a_dev": abs(a - cp), "b_dev": abs(b - cp)})
    return rows


def _pairs_min_separation(samples: list[PointX]) -> tuple[float, tuple[int, int]]:
    best = (math.inf, (-1, -1))
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            d = kernels.separation(samples[i], samples[j])
            if d < best[0]:
                best = (d, (i, j))
    return best


def injectivity_scan(frame: ModeFrame, cfg: EmbeddingConfig, samples: list[PointX],
                     separation_floor: float = kernels.DEFAULT_SEPARATION_FLOOR,
                     chunk: int = 1 << 15) -> tuple[float, tuple[int, int]]:
    """Largest normalized correlation over all sample pairs, and the pair reaching it."""
    _check(frame, cfg)
    if len(samples) < 2:
        raise ValidationError("need at least two samples", "samples")
    sep, pair = _pairs_min_separation(samples)
    if sep < separation_floor:
        raise ValidationError(
            f"samples {pair} are {sep:.3g} apart, below the separation floor {separation_floor}",
            "samples",
        )
    for s in samples:
        kernels._check_point(frame, s)
    if frame.empty:
        raise ThresholdError(f"empty frame at k={frame.k}")
    S = len(samples)
    Y = np.stack([s.y for s in samples])
    X = np.stack([s.x for s in samples])
    lw = kernels._log_weights(frame) + frame.log_norm
    # per-sample shift; it cancels in the normalized correlation
    shift = np.max(lw[None, :] - 2.0 * (Y @ frame.modes.T), axis=1) if len(frame) <= chunk else None
    if shift is None:
        shift = np.full(S, -np.inf)
        for c0 in range(0, len(frame), chunk):
            m = frame.modes[c0:c0 + chunk]
            shift = np.maximum(shift, np.max(lw[None, c0:c0 + chunk] - 2.0 * (Y @ m.T), axis=1))
    half = 0.5 * shift
    G = np.zeros((S, S), dtype=complex)
    for c0 in range(0, len(frame), chunk):
        m = frame.modes[c0:c0 + chunk]
        amp = np.exp(0.5 * lw[None, c0:c0 + chunk] - Y @ m.T - half[:, None])
        A = amp * np.exp(1j * (X @ m.T))
        for i in range(S):
            G[i, i:] += (A[i:] * np.conj(A[i])[None, :]).sum(axis=1)
    diag = G.diagonal().real
    best = (-1.0, (-1, -1))
    for i in range(S):
        for j in range(i + 1, S):
            c = min(abs(G[i, j]) / math.sqrt(diag[i] * diag[j]), 1.0)
            if c > best[0]:
                best = (c, (i, j))
    return best


def sphere_defect(frame: ModeFrame, cfg: EmbeddingConfig, samples: list[PointX]) -> tuple[float, list[dict]]:
    """sup | |F_k| - 1 | over samples, plus first-derivative sizes of |F_k|.

    The derivative of |F| along a unit direction v is (d|F|^2)(v) / (2|F|),
    with d|F|^2 along a sphere-tangent w equal to sum eta (-2<m,w>) |s|^2;
    torus directions give exactly zero.
    """
    _check(frame, cfg)
    if cfg.scaling != "sphere-normalized":
        raise ValidationError("sphere_defect needs the sphere-normalized scaling", "embedding.scaling")
    if not samples:
        raise ValidationError("need at least one sample", "samples")
    from .models import sphere_tangent_frame

    s = scale_sq(frame, cfg)
    sup = 0.0
    c1 = []
    for p in samples:
        nsq = embed_norm_sq(frame, cfg, p)
        norm = math.sqrt(nsq)
        sup = max(sup, abs(norm - 1.0))
        grads = []
        for t in sphere_tangent_frame(p.y):
            dn = s * _moment(frame, p, -2.0 * (frame.modes @ t)) / (2.0 * norm)
            grads.append(abs(dn))
        c1.append({"value": abs(norm - 1.0), "torus_grad": 0.0, "sphere_grad": max(grads)})
    return sup, c1


def embed_probe(frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> dict:
    dev = pullback_deviation(frame, cfg, p)
    out = {
        "k": frame.k,
        "scaling": cfg.scaling,
        "point": p.as_dict(),
        "norm_sq": embed_norm_sq(frame, cfg, p),
        "pullback": {"dx": dev["dx"], "reeb_pairing": dev["reeb_pairing"]},
    }
    if cfg.variant == "reeb":
        a, b, c = equivariance_metrics(frame, cfg, p)
        out["equivariance"] = {"a": a, "b": b, "c": c}
    return out


def write_components_csv(path, frame: ModeFrame, cfg: EmbeddingConfig, p: PointX) -> int:
    """Coordinates of F_k(p), one row per mode: m_1..m_n, re, im."""
    from .io import write_csv

    if len(frame) > EXPORT_ROW_CAP:
        raise ResourceError(
            f"component export would write {len(frame)} rows, over the cap of {EXPORT_ROW_CAP}",
            estimate=len(frame),
            budget=EXPORT_ROW_CAP,
        )
    kernels._check_point(frame, p)
    amp = np.sqrt(scale_sq(frame, cfg) * frame.weight) * np.exp(
        0.5 * frame.log_norm - frame.modes @ p.y
    )
    ph = frame.modes @ p.x
    rows = (
        list(m) + [a * math.cos(t), a * math.sin(t)]
        for m, a, t in zip(frame.modes.tolist(), amp, ph)
    )
    header = [f"mode_m{i + 1}" for i in range(frame.model.n)] + ["re", "im"]
    return write_csv(path, header, rows)
