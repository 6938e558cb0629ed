"""Model CR manifolds with exact spectra.

Two families:

* the tube X = T^n x S^{n-1}_eps of radius eps over the flat torus
  C^n / 2 pi Z^n, whose Toeplitz operator has eigenfunctions
  s_m = e^{i<m,z>} / norm_m and eigenvalues |m| gamma_n'(2 eps |m|) / gamma_n(2 eps |m|);
* circle bundles over a projective space, where the eigenvalue m appears
  with the multiplicity given by a Hilbert polynomial.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import specfun
from .errors import DomainError, ResourceError, UnsupportedError, ValidationError

# Default memory budget for shell tables and mode frames.
DEFAULT_BUDGET_BYTES = 2 * 1024**3
POINT_TOL = 1e-12
VARIANTS = ("grauert", "reeb")


class ModelSpectrum:
    """Interface: positive eigenvalues with multiplicities, listed up to a cutoff."""

    cr_dimension: int

    def spectrum_arrays(self, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues in (0, cutoff] and their multiplicities."""
        raise NotImplementedError

    def limit_constant(self) -> float:
        """C with k^-(d+1) sum mult chi(lambda/k) -> C int t^d chi(t) dt."""
        raise UnsupportedError(f"{type(self).__name__} has no registered limit constant", "model")

    def describe(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------- lattice counts


def square_counts(n: int, max_norm_sq: int) -> np.ndarray:
    """r_n(N) for 0 <= N <= max_norm_sq: ordered representations as n squares.

    Exact integer convolution r_n = r_{n-1} * r_1, where r_1 is 1 at 0 and 2
    at every positive square.
    """
    if n < 1:
        raise DomainError(f"need n >= 1, got {n}")
    size = int(max_norm_sq) + 1
    squares = [j * j for j in range(1, math.isqrt(size - 1) + 1)] if size > 1 else []
    r = np.zeros(size, dtype=np.int64)
    r[0] = 1
    for s in squares:
        r[s] = 2
    for _ in range(n - 1):
        prev = r
        r = prev.copy()
        for s in squares:
            r[s:] += 2 * prev[: size - s]
    return r


@dataclass(frozen=True)
class LatticeShell:
    norm_sq: int
    count: int
    lam: float


def _check_budget(nbytes: float, budget: float, what: str) -> None:
    if nbytes > budget:
        raise ResourceError(
            f"{what} needs about {nbytes / 2**20:.1f} MiB, over the budget of {budget / 2**20:.1f} MiB",
            estimate=nbytes,
            budget=budget,
        )


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class PointX:
    """A point of T^n x S^{n-1}_eps: torus angles x and sphere point y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        y = np.array(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise ValidationError(f"x has {x.size} components but y has {y.size}", "point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("coordinates must be finite", "point")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def check_on(self, eps: float) -> None:
        r = float(np.linalg.norm(self.y))
        if abs(r - eps) > POINT_TOL:
            raise ValidationError(f"|y| = {r!r} differs from eps = {eps!r}", "point.y")

    def translated(self, a) -> "PointX":
        return PointX(self.x + np.asarray(a, dtype=float), self.y)

    def as_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


def sphere_point(eps: float, direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    return eps * d / np.linalg.norm(d)


# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class GeometryConstants:
    """Contact data of the tube.

    xi = -sum y_j dx_j; Reeb field R = -(1/eps^2) sum y_j d/dx_j.
    """

    n: int
    eps: float
    sigma_p_xi: float
    dvxi_over_dv: float
    provenance: dict = field(default_factory=dict, compare=False)

    def xi_at(self, p: PointX) -> tuple[np.ndarray, np.ndarray]:
        """(torus components, sphere-frame components) of xi at p."""
        return -np.asarray(p.y, dtype=float), np.zeros(self.n - 1)

    def reeb_at(self, p: PointX) -> tuple[np.ndarray, np.ndarray]:
        """(torus direction u, sphere direction w) of the Reeb field at p."""
        return -np.asarray(p.y, dtype=float) / self.eps**2, np.zeros(self.n)


def sphere_tangent_frame(y: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the tangent space to the sphere at y."""
    y = np.asarray(y, dtype=float)
    n = y.size
    basis = np.eye(n)
    # Householder reflection sending e_0 to y/|y|; its other columns span y-perp.
    u = y / np.linalg.norm(y)
    v = u - basis[0]
    if np.linalg.norm(v) < 1e-14:
        h = basis
    else:
        v = v / np.linalg.norm(v)
        h = basis - 2.0 * np.outer(v, v)
    return h[:, 1:].T.copy()


def _alternating_eval(xi: np.ndarray, omega: np.ndarray, frame: np.ndarray, d: int) -> float:
    """(xi ^ omega^d)(v_0, ..., v_{2d}) for a 1-form xi and 2-form omega.

    Uses the alternation formula with the 1 / (1! (2!)^d) normalization,
    summing over all permutations of the frame.
    """
    k = 2 * d + 1
    a = frame @ xi  # xi(v_i)
    b = frame @ omega @ frame.T  # omega(v_i, v_j)
    total = 0.0
    for perm in itertools.permutations(range(k)):
        inv = sum(1 for i in range(k) for j in range(i + 1, k) if perm[i] > perm[j])
        term = a[perm[0]]
        for i in range(d):
            term *= b[perm[1 + 2 * i], perm[2 + 2 * i]]
        total += -term if inv % 2 else term
    return total / (2.0**d)


def contact_density_oracle(n: int, eps: float, y) -> float:
    """dV_xi / dV at a sphere point y, from explicit exterior algebra.

    dV_xi = 2^{-d}/d! xi ^ (d xi)^d is evaluated on an orthonormal frame of
    T_p X (the n torus directions and an orthonormal sphere frame) in the
    ambient coordinates (x_1..x_n, y_1..y_n).
    """
    d = n - 1
    y = np.asarray(y, dtype=float)
    xi = np.concatenate([-y, np.zeros(n)])
    omega = np.zeros((2 * n, 2 * n))
    # d xi = sum_j dx_j ^ dy_j
    for j in range(n):
        omega[j, n + j] = 1.0
        omega[n + j, j] = -1.0
    tang = sphere_tangent_frame(y)
    frame = np.zeros((2 * n - 1, 2 * n))
    frame[:n, :n] = np.eye(n)
    frame[n:, n:] = tang
    val = _alternating_eval(xi, omega, frame, d)
    return abs(val) / math.factorial(d) / 2.0**d


# ---------------------------------------------------------------- torus tube


@dataclass(frozen=True)
class TorusGrauertTube(ModelSpectrum):
    """Tube of radius eps over the n-torus, with the grauert or reeb operator."""

    n: int
    eps: float
    variant: str = "grauert"
    budget_bytes: float = DEFAULT_BUDGET_BYTES

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"must be an integer >= 2, got {self.n!r}", "model.n")
        object.__setattr__(self, "n", int(self.n))
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValidationError(f"must be a positive finite number, got {self.eps!r}", "model.eps")
        if self.variant not in VARIANTS:
            raise ValidationError(f"must be one of {VARIANTS}, got {self.variant!r}", "model.operator_variant")

    @property
    def cr_dimension(self) -> int:
        return self.n - 1

    @property
    def lambda_scale(self) -> float:
        return 1.0 / self.eps if self.variant == "reeb" else 1.0

    def eigenvalues_of_norm(self, rho) -> np.ndarray:
        """Vectorized lambda(|m|) for |m| = rho."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        _, comp = specfun.gamma_bulk(self.n, 2.0 * self.eps * rho)
        return rho * (1.0 - comp) * self.lambda_scale

    def log_norm_sq(self, rho) -> np.ndarray:
        """log((2 pi)^n eps^{n-1} gamma_n(2 eps rho) vol(S^{n-2})), vectorized."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        lg, _ = specfun.gamma_bulk(self.n, 2.0 * self.eps * rho)
        return (
            self.n * math.log(2 * math.pi)
            + (self.n - 1) * math.log(self.eps)
            + lg
            + math.log(specfun.sphere_volume(self.n - 2))
        )

    def norm_for_eigenvalue(self, lam: float) -> float:
        """Inverse of rho -> lambda(rho) by bisection (relative tolerance 1e-12)."""
        if lam <= 0:
            return 0.0
        target = lam / self.lambda_scale

        def f(r):
            return float(self.eigenvalues_of_norm(r)[0]) / self.lambda_scale

        lo, hi = target, target + 1.0
        while f(hi) < target:
            hi = target + 2.0 * (hi - target)
        while hi - lo > 1e-12 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if f(mid) < target:
                lo = mid
            else:
                hi = mid
        return hi

    def shell_arrays(self, max_norm_sq: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(norm_sq, count, lambda) over nonempty shells 1 <= N <= max_norm_sq."""
        max_norm_sq = int(max_norm_sq)
        _check_budget(8.0 * 6 * (max_norm_sq + 1), self.budget_bytes, "shell table")
        counts = square_counts(self.n, max_norm_sq)
        N = np.nonzero(counts)[0]
        N = N[N > 0]
        lam = self.eigenvalues_of_norm(np.sqrt(N.astype(float)))
        return N, counts[N], lam

    def shell_window(self, lam_lo: float, lam_hi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(norm_sq, count, lambda, log normalizer) over shells with lam_lo < lambda < lam_hi.

        One gamma_bulk pass over the shells near the window; eigenvalues and
        normalizers share it.
        """
        top = math.floor(self.norm_for_eigenvalue(lam_hi) ** 2) + 1
        bottom = max(1, math.floor(self.norm_for_eigenvalue(lam_lo) ** 2) - 1)
        _check_budget(8.0 * 6 * (top + 1), self.budget_bytes, "shell table")
        counts = square_counts(self.n, top)
        N = np.nonzero(counts)[0]
        N = N[N >= bottom]
        rho = np.sqrt(N.astype(float))
        lg, comp = specfun.gamma_bulk(self.n, 2.0 * self.eps * rho)
        lam = rho * (1.0 - comp) * self.lambda_scale
        inside = (lam > lam_lo) & (lam < lam_hi)
        N, rho, lg, lam = N[inside], rho[inside], lg[inside], lam[inside]
        log_norm = (
            self.n * math.log(2 * math.pi)
            + (self.n - 1) * math.log(self.eps)
            + lg
            + math.log(specfun.sphere_volume(self.n - 2))
        )
        return N, counts[N], lam, log_norm

    def spectrum_arrays(self, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
        if not cutoff > 0:
            raise DomainError(f"cutoff must be > 0, got {cutoff!r}")
        rho = self.norm_for_eigenvalue(cutoff)
        # one shell outward so nothing at the boundary is missed
        N, cnt, lam = self.shell_arrays(math.floor(rho * rho) + 1)
        keep = lam <= cutoff
        return lam[keep], cnt[keep]

    def limit_constant(self) -> float:
        scale = self.eps**self.n if self.variant == "reeb" else 1.0
        return scale * specfun.sphere_volume(self.n - 1)

    def describe(self) -> dict:
        return {"kind": "torus", "n": self.n, "eps": self.eps, "operator_variant": self.variant}


def lattice_shells(n: int, max_norm: float, budget_bytes: float = DEFAULT_BUDGET_BYTES,
                   eps: float = 0.5) -> list[LatticeShell]:
    """Nonempty shells 1 <= N <= max_norm^2, with the grauert eigenvalue at radius eps."""
    if not max_norm > 0:
        raise DomainError(f"max_norm must be > 0, got {max_norm!r}")
    model = TorusGrauertTube(n, eps, "grauert", budget_bytes)
    # floor of max_norm^2, guarding against max_norm^2 landing just below an integer
    top = math.floor(max_norm * max_norm + 1e-9)
    N, cnt, lam = model.shell_arrays(top)
    return [LatticeShell(int(a), int(b), float(c)) for a, b, c in zip(N, cnt, lam)]


def eigenvalue(model: TorusGrauertTube, norm: float) -> float:
    if norm < 0:
        raise DomainError(f"norm must be >= 0, got {norm!r}")
    return float(model.eigenvalues_of_norm(norm)[0])


def spectrum_up_to(model: ModelSpectrum, cutoff: float) -> list[tuple[float, int]]:
    lam, mult = model.spectrum_arrays(cutoff)
    return [(float(a), int(b)) for a, b in zip(lam, mult)]


def lattice_vectors(n: int, n_min: int, n_max: int) -> np.ndarray:
    """All m in Z^n with n_min <= |m|^2 <= n_max, as an (M, n) int64 array.

    The first n-1 coordinates are built by pruned products; the last one is
    filled in as whole integer ranges per partial vector.
    """
    n_min, n_max = max(int(n_min), 0), int(n_max)
    if n_max < n_min:
        return np.zeros((0, n), dtype=np.int64)
    R = math.isqrt(n_max)
    axis = np.arange(-R, R + 1, dtype=np.int64)
    part = np.zeros((1, 0), dtype=np.int64)
    sq = np.zeros(1, dtype=np.int64)
    for _ in range(n - 1):
        pp = np.repeat(part, axis.size, axis=0)
        ss = np.repeat(sq, axis.size) + np.tile(axis * axis, sq.size)
        aa = np.tile(axis, sq.size)
        keep = ss <= n_max
        part = np.concatenate([pp[keep], aa[keep, None]], axis=1)
        sq = ss[keep]
    # last coordinate a: n_min - s <= a^2 <= n_max - s
    top = np.floor(np.sqrt((n_max - sq).astype(float))).astype(np.int64)
    top -= (top * top > n_max - sq)
    top += ((top + 1) ** 2 <= n_max - sq)
    low_sq = n_min - sq
    bot = np.where(low_sq > 0, np.ceil(np.sqrt(np.maximum(low_sq, 0).astype(float))), 1).astype(np.int64)
    bot += (bot * bot < low_sq)
    bot -= ((bot - 1) ** 2 >= np.maximum(low_sq, 1)) & (bot > 1)
    pos_len = np.maximum(top - bot + 1, 0)
    zero_ok = low_sq <= 0
    blocks = []
    for sign in (1, -1):
        rep = np.repeat(np.arange(sq.size), pos_len)
        start = np.repeat(np.cumsum(pos_len) - pos_len, pos_len)
        a = bot[rep] + (np.arange(rep.size) - start)
        blocks.append(np.concatenate([part[rep], (sign * a)[:, None]], axis=1))
    zi = np.nonzero(zero_ok)[0]
    blocks.append(np.concatenate([part[zi], np.zeros((zi.size, 1), dtype=np.int64)], axis=1))
    out = np.concatenate(blocks, axis=0)
    # canonical lexicographic order, so sums never depend on construction details
    order = np.lexsort(out.T[::-1])
    return out[order]


def eigenfunction_log(model: TorusGrauertTube, m, p: PointX) -> tuple[float, float]:
    """(log |s_m(p)|, arg s_m(p) in [0, 2 pi))."""
    m = np.asarray(m, dtype=float)
    rho = float(np.linalg.norm(m))
    log_mod = -float(m @ p.y) - 0.5 * float(model.log_norm_sq(rho)[0])
    phase = math.fmod(float(m @ p.x), 2 * math.pi)
    if phase < 0:
        phase += 2 * math.pi
    return log_mod, phase


# ---------------------------------------------------------------- sphere rules

SUPPORTED_SPHERE_N = (2, 3)


def sphere_rule(n: int, eps: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (M, n) and weights on S^{n-1}_eps for n in {2, 3}.

    n = 2: trapezoid rule on the circle (spectrally accurate for periodic
    integrands). n = 3: Gauss-Legendre in cos(theta) times a trapezoid rule in phi.
    """
    if n == 2:
        th = 2 * math.pi * np.arange(nodes) / nodes
        pts = eps * np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(nodes, 2 * math.pi * eps / nodes)
        return pts, w
    if n == 3:
        u, wu = np.polynomial.legendre.leggauss(nodes)
        nphi = 2 * nodes
        ph = 2 * math.pi * np.arange(nphi) / nphi
        s = np.sqrt(1 - u * u)
        pts = eps * np.stack(
            [np.outer(s, np.cos(ph)).ravel(), np.outer(s, np.sin(ph)).ravel(), np.repeat(u, nphi)],
            axis=1,
        )
        w = eps**2 * np.repeat(wu, nphi) * (2 * math.pi / nphi)
        return pts, w
    raise UnsupportedError(
        f"sphere quadrature is implemented for n in {SUPPORTED_SPHERE_N}, got n={n}", "model.n"
    )


def default_sphere_nodes(eps: float, max_norm: float, n: int = 2) -> int:
    """Node count resolving exp(-<a, y>) with |a| = max_norm on S^{n-1}_eps.

    Circle: the trapezoid rule needs a few times eps |a| nodes. Sphere: the
    Gauss-Legendre factor in cos(theta) reaches machine precision from about
    24 + eps |a| nodes (checked against 4 pi eps^2 sinh(eps|a|) / (eps|a|)).
    """
    if n == 3:
        return int(24 + math.ceil(eps * max_norm))
    return int(64 + 4 * math.ceil(2 * eps * max_norm))


def log_sphere_integral(n: int, eps: float, a: np.ndarray, nodes: int) -> np.ndarray:
    """log int_{S^{n-1}_eps} exp(-<a_i, y>) dS(y) for each row a_i, by log-sum-exp."""
    pts, w = sphere_rule(n, eps, nodes)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    e = -(a @ pts.T) + np.log(w)[None, :]
    mx = e.max(axis=1, keepdims=True)
    return mx[:, 0] + np.log(np.exp(e - mx).sum(axis=1))


def orthonormality_residual(model: TorusGrauertTube, m, m2, grid: int = 16,
                            sphere_nodes: int | None = None) -> float:
    """|<s_m, s_m2>_{L^2(X)} - delta| by product quadrature on T^n x S^{n-1}_eps.

    ``grid`` is the trapezoid resolution per torus dimension (minimum 3); the
    torus factor is exact when every |m_j - m2_j| < grid.
    """
    if grid < 3:
        raise ValidationError(f"must be >= 3, got {grid}", "grid")
    m = np.asarray(m, dtype=np.int64)
    m2 = np.asarray(m2, dtype=np.int64)
    n = model.n
    if m.size != n or m2.size != n:
        raise ValidationError(f"lattice vectors must have {n} components", "m")
    if n not in SUPPORTED_SPHERE_N:
        raise UnsupportedError(
            f"sphere quadrature is implemented for n in {SUPPORTED_SPHERE_N}, got n={n}", "model.n"
        )
    xs = 2 * math.pi * np.arange(grid) / grid
    torus = 1.0 + 0.0j
    for j in range(n):
        torus *= np.exp(1j * (m[j] - m2[j]) * xs).sum() * (2 * math.pi / grid)
    rho1 = float(np.linalg.norm(m))
    rho2 = float(np.linalg.norm(m2))
    if sphere_nodes is None:
        sphere_nodes = default_sphere_nodes(model.eps, rho1 + rho2, n)
    log_s = log_sphere_integral(n, model.eps, (m + m2)[None, :].astype(float), sphere_nodes)[0]
    log_norm = 0.5 * (model.log_norm_sq(rho1)[0] + model.log_norm_sq(rho2)[0])
    val = torus * math.exp(log_s - log_norm)
    target = 1.0 if np.array_equal(m, m2) else 0.0
    return float(abs(val - target))


def geometry_constants(model: TorusGrauertTube) -> GeometryConstants:
    n, eps = model.n, model.eps
    sigma = eps if model.variant == "grauert" else 1.0
    density = eps / 2.0 ** (n - 1)
    return GeometryConstants(
        n=n,
        eps=eps,
        sigma_p_xi=sigma,
        dvxi_over_dv=density,
        provenance={
            "sigma_p_xi": "principal symbol of the operator at xi; grauert = (i/eps) T gives eps, reeb gives xi(R) = 1",
            "dvxi_over_dv": "eps / 2^(n-1); matched by contact_density_oracle (explicit alternation "
                            "of xi ^ (d xi)^(n-1) on an orthonormal frame)",
            "xi": "xi = -sum y_j dx_j, Reeb R = -(1/eps^2) sum y_j d/dx_j",
        },
    )


# ---------------------------------------------------------------- circle bundles


def _as_fraction(c) -> Fraction:
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c).limit_denominator(10**6)
    return Fraction(c)


@dataclass(frozen=True)
class CircleBundleModel(ModelSpectrum):
    """Eigenvalue m (m = 1, 2, ...) with multiplicity sum_i c_i m^i."""

    hilbert_coeffs: tuple
    name: str = "custom"
    budget_bytes: float = DEFAULT_BUDGET_BYTES

    def __post_init__(self):
        coeffs = tuple(_as_fraction(c) for c in self.hilbert_coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) < 2 or coeffs[-1] <= 0:
            raise ValidationError(
                "need a polynomial of degree >= 1 with positive leading coefficient",
                "model.hilbert_coeffs",
            )
        object.__setattr__(self, "hilbert_coeffs", coeffs)

    @classmethod
    def cp1(cls) -> "CircleBundleModel":
        return cls((1, 1), name="CP1")

    @classmethod
    def cp2(cls) -> "CircleBundleModel":
        return cls((1, Fraction(3, 2), Fraction(1, 2)), name="CP2")

    @property
    def cr_dimension(self) -> int:
        return len(self.hilbert_coeffs) - 1

    def multiplicity(self, m: int) -> int:
        if int(m) != m or m < 1:
            raise DomainError(f"m must be an integer >= 1, got {m!r}")
        v = sum(c * Fraction(int(m)) ** i for i, c in enumerate(self.hilbert_coeffs))
        if v.denominator != 1 or v <= 0:
            raise ValidationError(f"multiplicity at m={m} is {v}, not a positive integer", "model.hilbert_coeffs")
        return int(v)

    def shell_window(self, lam_lo: float, lam_hi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(norm_sq, count, lambda, log normalizer) over shells with lam_lo < lambda < lam_hi.

        One gamma_bulk pass over the shells near the window; eigenvalues and
        normalizers share it.
        """
        top = math.floor(self.norm_for_eigenvalue(lam_hi) ** 2) + 1
        bottom = max(1, math.floor(self.norm_for_eigenvalue(lam_lo) ** 2) - 1)
        _check_budget(8.0 * 6 * (top + 1), self.budget_bytes, "shell table")
        counts = square_counts(self.n, top)
        N = np.nonzero(counts)[0]
        N = N[N >= bottom]
        rho = np.sqrt(N.astype(float))
        lg, comp = specfun.gamma_bulk(self.n, 2.0 * self.eps * rho)
        lam = rho * (1.0 - comp) * self.lambda_scale
        inside = (lam > lam_lo) & (lam < lam_hi)
        N, rho, lg, lam = N[inside], rho[inside], lg[inside], lam[inside]
        log_norm = (
            self.n * math.log(2 * math.pi)
            + (self.n - 1) * math.log(self.eps)
            + lg
            + math.log(specfun.sphere_volume(self.n - 2))
        )
        return N, counts[N], lam, log_norm

    def spectrum_arrays(self, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
        if not cutoff > 0:
            raise DomainError(f"cutoff must be > 0, got {cutoff!r}")
        top = math.floor(cutoff)
        _check_budget(16.0 * top, self.budget_bytes, "circle-bundle spectrum")
        m = np.arange(1, top + 1)
        # exact integer evaluation: common denominator, then Horner in Python ints
        den = math.lcm(*(c.denominator for c in self.hilbert_coeffs))
        num = [int(c * den) for c in self.hilbert_coeffs]
        vals = np.zeros(top, dtype=object)
        for c in reversed(num):
            vals = vals * m + c
        mult = vals // den
        if np.any(mult * den != vals) or np.any(mult <= 0):
            raise ValidationError("Hilbert polynomial is not a positive integer on the spectrum", "model.hilbert_coeffs")
        return m.astype(float), mult.astype(np.int64)

    def limit_constant(self) -> float:
        return float(self.hilbert_coeffs[-1])

    def describe(self) -> dict:
        return {
            "kind": "circle_bundle",
            "name": self.name,
            "hilbert_coeffs": [str(c) for c in self.hilbert_coeffs],
        }


def hilbert_multiplicity(model: CircleBundleModel, m: int) -> int:
    return model.multiplicity(m)


def write_spectrum_csv(path, model: ModelSpectrum, cutoff: float) -> int:
    from .io import write_csv

    lam, mult = model.spectrum_arrays(cutoff)
    return write_csv(path, ["lambda", "multiplicity"], zip(lam, mult))


def write_shell_csv(path, model: TorusGrauertTube, max_norm: float) -> int:
    from .io import write_csv

    N, cnt, lam = model.shell_arrays(math.floor(max_norm * max_norm + 1e-9))
    return write_csv(path, ["norm_sq", "count", "lambda"], zip(N, cnt, lam))
