from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import GeometryError
from ..imaging import GrayImage, PixelPos


@dataclass(frozen=True, eq=False)
class Patch:
    """Square query window of side ``2 * radius + 1`` cut from a source map."""

    pixels: GrayImage
    center: PixelPos
    radius: int

    def __post_init__(self):
        side = 2 * self.radius + 1
        if self.pixels.shape != (side, side):
            raise GeometryError(f"patch of radius {self.radius} must be {side}x{side}, got {self.pixels.shape}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1


@dataclass(frozen=True, eq=False)
class ScoreField:
    """Dense grid of scores, one per valid patch placement.

    ``scores[iy, ix]`` is the score of the placement centred at map position
    ``(ix + origin_offset.x, iy + origin_offset.y)``. ``evaluated`` marks the
    cells that were actually scored (front-ends that sample on a stride grid
    fill the rest); ``None`` means every cell was evaluated.
    """

    scores: np.ndarray
    origin_offset: PixelPos
    evaluated: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def to_map(self, iy: int, ix: int) -> PixelPos:
        return PixelPos(int(ix) + self.origin_offset.x, int(iy) + self.origin_offset.y)

    def to_index(self, pos: PixelPos) -> tuple[int, int]:
        return pos.y - self.origin_offset.y, pos.x - self.origin_offset.x

    def evaluated_mask(self) -> np.ndarray:
        if self.evaluated is None:
            return np.ones(self.scores.shape, dtype=bool)
        return self.evaluated


Matcher = Callable[[Patch], ScoreField]


class FrontEnd:
    """Interface every localisation front-end implements.

    ``matcher(ref_map, radius)`` returns a callable scoring patches of that
    radius against ``ref_map``; it may precompute map-dependent state so
    repeated queries against the same map are cheap. ``center_step`` restricts
    query centres to a lattice (1 means any pixel).
    """

    name: str = "frontend"
    score_bounds: tuple[float, float] = (-1.0, 1.0)
    center_step: int = 1

    def admissible(self, radius: int) -> bool:
        return radius >= 1

    def check_radius(self, radius: int) -> None:
        raise NotImplementedError

    def matcher(self, ref_map: GrayImage, radius: int) -> Matcher:
        raise NotImplementedError

    def score_field(self, patch: Patch, ref_map: GrayImage) -> ScoreField:
        return self.matcher(ref_map, patch.radius)(patch)

    def to_config(self) -> dict:
        return {"name": self.name}


def check_fits(map_shape: tuple[int, int], center: PixelPos, radius: int) -> None:
    h, w = map_shape
    if radius < 0:
        raise GeometryError("radius must be non-negative")
    if not (radius <= center.x < w - radius and radius <= center.y < h - radius):
        raise GeometryError(
            f"patch of radius {radius} at ({center.x}, {center.y}) does not fit in a {w}x{h} map"
        )


def extract_patch(source: GrayImage, center: PixelPos, radius: int) -> Patch:
    center = PixelPos(int(center[0]), int(center[1]))
    check_fits(source.shape, center, radius)
    pixels = source.data[center.y - radius:center.y + radius + 1, center.x - radius:center.x + radius + 1]
    return Patch(GrayImage(pixels), center, radius)


def best_placement(field: ScoreField) -> tuple[PixelPos, float]:
    # Row-major argmax: first maximum is the smallest y, then smallest x.
    flat = int(np.argmax(field.scores))
    iy, ix = divmod(flat, field.scores.shape[1])
    return field.to_map(iy, ix), float(field.scores[iy, ix])


def localize(front_end: FrontEnd, patch: Patch, ref_map: GrayImage) -> tuple[PixelPos, float, ScoreField]:
    """Score ``patch`` against ``ref_map`` and return the best placement.

    Ties are broken by the smallest y, then the smallest x.
    """
    field = front_end.score_field(patch, ref_map)
    best, score = best_placement(field)
    return best, score, field
