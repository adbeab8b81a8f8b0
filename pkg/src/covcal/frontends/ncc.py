"""Zero-normalised cross-correlation front-end.

Window statistics come from summed-area tables and the correlation numerator
from a single FFT product, so a score field costs O(map area * log) no matter
how large the patch is.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from ..errors import ConstraintError, GeometryError
from ..imaging import GrayImage, PixelPos
from .base import FrontEnd, Patch, ScoreField

DEGENERATE_SIGMA = 1e-12
_EPS = np.finfo(np.float64).eps


def summed_area_table(arr: np.ndarray) -> np.ndarray:
    """Integral image with a leading row and column of zeros."""
    sat = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1))
    np.cumsum(arr, axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    return sat


def window_sums(sat: np.ndarray, side: int) -> np.ndarray:
    """Sum over every ``side x side`` window fully inside the image."""
    return sat[side:, side:] - sat[:-side, side:] - sat[side:, :-side] + sat[:-side, :-side]


class NCCMatcher:
    """Scores patches of one radius against one reference map.

    The map FFT and per-window standard deviations are computed once here;
    each call then needs one forward and one inverse FFT.
    """

    def __init__(self, ref_map: GrayImage, radius: int):
        side = 2 * radius + 1
        h, w = ref_map.shape
        if side > h or side > w:
            raise GeometryError(f"patch side {side} exceeds map size {w}x{h}")
        self.radius = radius
        self.side = side
        self.n = side * side
        self.out_shape = (h - side + 1, w - side + 1)
        # Centring the map keeps the E[x^2] - E[x]^2 cancellation small.
        centred = ref_map.data - ref_map.data.mean()
        sq = centred * centred
        s1 = window_sums(summed_area_table(centred), side)
        s2 = window_sums(summed_area_table(sq), side)
        mean = s1 / self.n
        var = s2 / self.n - mean * mean
        # Anything below the rounding floor of the tables is a flat window.
        floor = 64.0 * _EPS * float(sq.sum()) / self.n
        flat = var <= floor
        self.win_std = np.sqrt(np.where(flat, 0.0, var))
        self.win_flat = flat | (self.win_std < DEGENERATE_SIGMA)
        self.fft_shape = (sfft.next_fast_len(h + side - 1, real=True),
                          sfft.next_fast_len(w + side - 1, real=True))
        self.map_spectrum = sfft.rfft2(centred, s=self.fft_shape)

    def numerator(self, pixels: np.ndarray) -> np.ndarray:
        """sum_j (p_j - mean(p)) * w_j for every valid window w."""
        p0 = pixels - pixels.mean()
        spec = self.map_spectrum * np.conj(sfft.rfft2(p0, s=self.fft_shape))
        corr = sfft.irfft2(spec, s=self.fft_shape)
        return corr[:self.out_shape[0], :self.out_shape[1]]

    def __call__(self, patch: Patch) -> ScoreField:
        if patch.radius != self.radius:
            raise ConstraintError(f"matcher built for radius {self.radius}, got {patch.radius}")
        pixels = patch.pixels.data
        p_std = float(pixels.std())
        offset = PixelPos(self.radius, self.radius)
        if p_std < DEGENERATE_SIGMA:
            return ScoreField(np.zeros(self.out_shape), offset)
        denom = self.n * p_std * self.win_std
        num = self.numerator(pixels)
        safe = np.where(self.win_flat, 1.0, denom)
        scores = np.where(self.win_flat, 0.0, num / safe)
        np.clip(scores, -1.0, 1.0, out=scores)
        return ScoreField(scores, offset)


class NCCFrontEnd(FrontEnd):
    name = "ncc"
    score_bounds = (-1.0, 1.0)
    center_step = 1

    def check_radius(self, radius: int) -> None:
        if radius < 1:
            raise ConstraintError("NCC needs a patch radius >= 1")

    def matcher(self, ref_map: GrayImage, radius: int) -> NCCMatcher:
        self.check_radius(radius)
        return NCCMatcher(ref_map, radius)


def ncc_score_field(patch: Patch, ref_map: GrayImage) -> ScoreField:
    """Zero-normalised cross-correlation of ``patch`` at every valid placement.

    Placements where the patch or the map window has (numerically) zero
    variance score 0.0.
    """
    if patch.side > ref_map.width or patch.side > ref_map.height:
        raise GeometryError(f"patch side {patch.side} exceeds map size {ref_map.width}x{ref_map.height}")
    return NCCMatcher(ref_map, patch.radius)(patch)
