"""Normal fits of score populations and Weitzman's overlapping coefficient."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr

from .errors import BoundsError, FitError

GRID_POINTS = 4097
POINT_MASS_SIGMA = 1e-9
POINT_MASS_HALF_WIDTH = 1e-9


@dataclass(frozen=True)
class NormalFit:
    mean: float
    std: float
    n: int

    def pdf(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi))

    def cdf(self, x: float) -> float:
        return float(ndtr((x - self.mean) / self.std))

    @property
    def is_point_mass(self) -> bool:
        return self.std < POINT_MASS_SIGMA


def fit_normal(samples) -> NormalFit:
    """Maximum-likelihood normal fit (population standard deviation)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise FitError(f"need at least 2 samples to fit a normal, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitError("samples contain non-finite values")
    if x.min() == x.max():  # exact for constant pools, e.g. all-1.0 truth scores
        return NormalFit(mean=float(x[0]), std=0.0, n=int(x.size))
    return NormalFit(mean=float(x.mean()), std=float(x.std()), n=int(x.size))


def _point_mass_overlap(point: NormalFit, other: NormalFit, k0: float, k1: float) -> float:
    if not (k0 <= point.mean <= k1):
        return 0.0
    if other.is_point_mass:
        return 1.0 if abs(point.mean - other.mean) <= POINT_MASS_HALF_WIDTH else 0.0
    lo = max(k0, point.mean - POINT_MASS_HALF_WIDTH)
    hi = min(k1, point.mean + POINT_MASS_HALF_WIDTH)
    return max(0.0, other.cdf(hi) - other.cdf(lo))


def ovl_weitzman(p: NormalFit, q: NormalFit, k0: float, k1: float) -> float:
    """Weitzman's overlapping coefficient of two normals on ``[k0, k1]``.

    Integrates ``min(p(x), q(x))`` with composite Simpson's rule on a uniform
    grid of 4097 points. A fit with std below 1e-9 is treated as a point mass:
    the overlap is then the other distribution's mass within 1e-9 of it (1.0
    when both are point masses at the same place).
    """
    if not (math.isfinite(k0) and math.isfinite(k1)) or k0 >= k1:
        raise BoundsError(f"invalid integration bounds [{k0}, {k1}]")
    if p.is_point_mass:
        value = _point_mass_overlap(p, q, k0, k1)
    elif q.is_point_mass:
        value = _point_mass_overlap(q, p, k0, k1)
    else:
        x = np.linspace(k0, k1, GRID_POINTS)
        value = float(simpson(np.minimum(p.pdf(x), q.pdf(x)), x=x))
    return min(1.0, max(0.0, value))

