"""Seeded low-discrepancy sample points on T^n x S^{n-1}_eps."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import qmc

from .errors import UnsupportedError
from .models import PointX


def halton_points(n: int, eps: float, count: int, seed: int) -> list[PointX]:
    """Scrambled Halton points; the seed fully determines the output.

    Torus angles come from the first n coordinates. The sphere point comes
    from the remaining n-1: an angle on the circle for n = 2, and
    (cos theta, phi) with cos theta uniform (area-uniform) for n = 3.
    """
    if n not in (2, 3):
        raise UnsupportedError(f"sample points are implemented for n in (2, 3), got {n}", "model.n")
    u = qmc.Halton(d=2 * n - 1, scramble=True, seed=seed).random(count)
    pts = []
    for row in u:
        x = 2 * math.pi * row[:n]
        if n == 2:
            th = 2 * math.pi * row[2]
            y = [eps * math.cos(th), eps * math.sin(th)]
        else:
            c = 2 * row[3] - 1
            s = math.sqrt(max(1 - c * c, 0.0))
            ph = 2 * math.pi * row[4]
            y = [eps * s * math.cos(ph), eps * s * math.sin(ph), eps * c]
        pts.append(PointX(x, np.asarray(y)))
    return pts
