"""Counting functions, scaled spectral measures and traces of chi(T/k)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .models import ModelSpectrum, TorusGrauertTube
from .specfun import BumpFunction, bump_moment


@dataclass(frozen=True)
class MeasurePairingReport:
    k: float
    pairing: float
    limit: float
    n_eigen: int

    @property
    def rel_error(self) -> float:
        return abs(self.pairing - self.limit) / abs(self.limit)

    def as_dict(self) -> dict:
        return {"k": self.k, "pairing": self.pairing, "limit": self.limit, "n_eigen": self.n_eigen}


def _check_k(k: float, lowest: float = 0.0) -> None:
    if not (math.isfinite(k) and k > lowest):
        raise ValidationError(f"must be a finite number > {lowest}, got {k!r}", "k")


def window(model: ModelSpectrum, chi: BumpFunction, k: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues with lambda/k strictly inside the support of chi, and multiplicities."""
    if isinstance(model, TorusGrauertTube):
        # only the shells near the window are evaluated
        _, mult, lam, _ = model.shell_window(k * chi.delta1, k * chi.delta2)
        return lam, mult
    lam, mult = model.spectrum_arrays(k * chi.delta2)
    inside = (lam > k * chi.delta1) & (lam < k * chi.delta2)
    return lam[inside], mult[inside]


def _window_sum(model: ModelSpectrum, chi: BumpFunction, k: float) -> tuple[float, int]:
    lam, mult = window(model, chi, k)
    if lam.size == 0:
        return 0.0, 0
    # exactly rounded, so independent of ordering
    return math.fsum(mult * chi.eval(lam / k)), int(mult.sum())


def counting(model: ModelSpectrum, k: float) -> int:
    """N(k): eigenvalues <= k counted with multiplicity."""
    _check_k(k)
    _, mult = model.spectrum_arrays(k)
    return int(mult.sum())


def trace_chi(model: ModelSpectrum, chi: BumpFunction, k: float) -> float:
    """Tr chi(T/k) = sum mult chi(lambda/k)."""
    _check_k(k)
    return _window_sum(model, chi, k)[0]


def limit_pairing(model: ModelSpectrum, chi: BumpFunction) -> float:
    return model.limit_constant() * bump_moment(chi, model.cr_dimension)


def mu_pairing(model: ModelSpectrum, chi: BumpFunction, k: float) -> MeasurePairingReport:
    """<mu_k, chi> = k^-(d+1) sum mult chi(lambda/k)."""
    _check_k(k)
    total, count = _window_sum(model, chi, k)
    return MeasurePairingReport(
        k=float(k),
        pairing=total / k ** (model.cr_dimension + 1),
        limit=limit_pairing(model, chi),
        n_eigen=count,
    )


def weyl_scan(model: ModelSpectrum, ks) -> list[tuple[float, int]]:
    ks = [float(k) for k in ks]
    if not ks:
        return []
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError("must be strictly ascending", "ks")
    _check_k(ks[0])
    lam, mult = model.spectrum_arrays(ks[-1])
    cum = np.concatenate([[0], np.cumsum(mult)])
    idx = np.searchsorted(lam, ks, side="right")
    return [(k, int(cum[i])) for k, i in zip(ks, idx)]


def measure_report(model: ModelSpectrum, chi: BumpFunction, ks) -> dict:
    return {
        "model": model.describe(),
        "params": {"ks": [float(k) for k in ks], "d": model.cr_dimension},
        "chi": {"delta1": chi.delta1, "delta2": chi.delta2, "profile": chi.profile},
        "entries": [mu_pairing(model, chi, k).as_dict() for k in ks],
    }


def write_series_csv(path, series) -> int:
    from .io import write_csv

    return write_csv(path, ["k", "value"], series)
