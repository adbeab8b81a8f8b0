"""Local-feature front-end with sub-patch comparison.

A large patch is tiled into square sub-patches; each sub-patch is matched
against the corresponding sub-patch of the candidate placement and the
placement score is the mean inlier ratio over the tiles. Placements are
evaluated on a stride grid.

The built-in detector is a minimum-eigenvalue corner score with 5x5
non-maximum suppression, keeping the strongest few per sub-patch; the
descriptor is a 256-bit intensity-comparison string on a lightly smoothed
image. Every operation is a fixed sequence of
slice additions, so running detection on a large image and keeping the
keypoints at least ``MARGIN`` pixels inside a sub-window gives exactly the
result of running it on that sub-window alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConstraintError, GeometryError
from ..imaging import GrayImage, PixelPos
from .base import FrontEnd, Patch, ScoreField

DESCRIPTOR_RADIUS = 8
DESCRIPTOR_BITS = 256
NMS_RADIUS = 2
# response support (2) + NMS (2) = 4; smoothing (1) + descriptor reach (8) = 9
MARGIN = 9


def _comparison_pairs() -> np.ndarray:
    rng = np.random.RandomState(20190517)
    pairs = []
    while len(pairs) < DESCRIPTOR_BITS:
        a = rng.randint(-DESCRIPTOR_RADIUS, DESCRIPTOR_RADIUS + 1, size=2)
        b = rng.randint(-DESCRIPTOR_RADIUS, DESCRIPTOR_RADIUS + 1, size=2)
        if not np.array_equal(a, b):
            pairs.append((a[0], a[1], b[0], b[1]))
    return np.array(pairs, dtype=int)


PAIRS = _comparison_pairs()  # rows: (dy1, dx1, dy2, dx2)


@dataclass(frozen=True)
class FeatureConfig:
    subpatch_size: int = 40
    stride: int = 20
    inlier_tol: float = 5.0
    detector_threshold: float = 1e-3
    max_keypoints: int = 16
    max_hamming: int = 48

    def __post_init__(self):
        if self.subpatch_size < 2 * MARGIN + 1:
            raise ValueError(f"subpatch_size must be >= {2 * MARGIN + 1}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.inlier_tol < 0:
            raise ValueError("inlier_tol must be >= 0")
        if self.detector_threshold < 0:
            raise ValueError("detector_threshold must be >= 0")
        if self.max_keypoints < 1:
            raise ValueError("max_keypoints must be >= 1")
        if not 0 <= self.max_hamming <= DESCRIPTOR_BITS:
            raise ValueError(f"max_hamming must be in [0, {DESCRIPTOR_BITS}]")


def _box3(a: np.ndarray) -> np.ndarray:
    """3x3 sum, valid on pixels at least 1 from the border (border left 0)."""
    out = np.zeros_like(a)
    acc = out[1:-1, 1:-1]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            acc += a[1 + dy:a.shape[0] - 1 + dy, 1 + dx:a.shape[1] - 1 + dx]
    return out


def corner_response(a: np.ndarray) -> np.ndarray:
    """Minimum eigenvalue of the 3x3-summed structure tensor.

    Valid on pixels at least 2 from the border; the rest is 0.
    """
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    gx[:, 1:-1] = (a[:, 2:] - a[:, :-2]) * 0.5
    gy[1:-1, :] = (a[2:, :] - a[:-2, :]) * 0.5
    # Gradients at the outermost ring are incomplete; keep them out of the sums.
    for g in (gx, gy):
        g[0, :] = g[-1, :] = 0.0
        g[:, 0] = g[:, -1] = 0.0
    sxx = _box3(gx * gx)
    syy = _box3(gy * gy)
    sxy = _box3(gx * gy)
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(0.25 * (sxx - syy) ** 2 + sxy * sxy, 0.0))
    resp = half_tr - disc
    resp[:2, :] = resp[-2:, :] = 0.0
    resp[:, :2] = resp[:, -2:] = 0.0
    return resp


def detect_and_describe(a: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Keypoints ``(K, 2)`` as ``(x, y)``, boolean descriptors ``(K, 256)``
    and corner responses ``(K,)``.

    Only keypoints at least ``MARGIN`` pixels from every border are returned,
    ordered row-major.
    """
    a = np.asarray(a, dtype=np.float64)
    h, w = a.shape
    if h < 2 * MARGIN + 1 or w < 2 * MARGIN + 1:
        return np.zeros((0, 2), dtype=int), np.zeros((0, DESCRIPTOR_BITS), dtype=bool), np.zeros(0)
    resp = corner_response(a)
    core = resp[MARGIN:h - MARGIN, MARGIN:w - MARGIN]
    is_max = core > threshold
    for dy in range(-NMS_RADIUS, NMS_RADIUS + 1):
        for dx in range(-NMS_RADIUS, NMS_RADIUS + 1):
            if dy == 0 and dx == 0:
                continue
            nb = resp[MARGIN + dy:h - MARGIN + dy, MARGIN + dx:w - MARGIN + dx]
            is_max &= core >= nb
    ys, xs = np.nonzero(is_max)
    ys = ys + MARGIN
    xs = xs + MARGIN
    smooth = _box3(a)
    d = (smooth[ys[:, None] + PAIRS[None, :, 0], xs[:, None] + PAIRS[None, :, 1]]
         < smooth[ys[:, None] + PAIRS[None, :, 2], xs[:, None] + PAIRS[None, :, 3]])
    return np.stack([xs, ys], axis=1).astype(int), d, resp[ys, xs]


def strongest(kps: np.ndarray, desc: np.ndarray, resp: np.ndarray, k: int):
    """Keep the ``k`` strongest keypoints (earlier row-major wins ties), in row-major order."""
    if len(kps) <= k:
        return kps, desc
    keep = np.sort(np.argsort(-resp, kind="stable")[:k])
    return kps[keep], desc[keep]


def tile_features(sub: np.ndarray, cfg: "FeatureConfig"):
    """Keypoints and descriptors of one sub-patch, detected on it alone."""
    return strongest(*detect_and_describe(sub, cfg.detector_threshold), cfg.max_keypoints)


def mutual_matches(dq: np.ndarray, dr: np.ndarray, max_hamming: int) -> list[tuple[int, int]]:
    """Mutual nearest neighbours under Hamming distance (first index wins ties)."""
    if len(dq) == 0 or len(dr) == 0:
        return []
    dist = (dq[:, None, :] != dr[None, :, :]).sum(axis=2)
    fwd = dist.argmin(axis=1)
    bwd = dist.argmin(axis=0)
    return [(i, int(j)) for i, j in enumerate(fwd) if bwd[j] == i and dist[i, j] <= max_hamming]


def inlier_ratio(kq, dq, kr, dr, cfg: FeatureConfig) -> float:
    """Fraction of matches whose displacement is within ``inlier_tol``.

    Keypoints are in the local coordinates of their own sub-patch, so a
    correct placement implies zero displacement.
    """
    matches = mutual_matches(dq, dr, cfg.max_hamming)
    if not matches:
        return 0.0
    qi = np.array([m[0] for m in matches])
    ri = np.array([m[1] for m in matches])
    disp = kr[ri] - kq[qi]
    inliers = int(np.count_nonzero(np.hypot(disp[:, 0], disp[:, 1]) <= cfg.inlier_tol))
    return inliers / max(1, len(matches))


def stride_positions(n: int, stride: int) -> np.ndarray:
    return np.arange(0, n, stride)


def densify(sparse: np.ndarray, shape: tuple[int, int], stride: int) -> np.ndarray:
    """Fill every cell from the stride sample at or before it on each axis.

    Filling from the preceding sample (rather than the nearest one) keeps the
    row-major argmax on an evaluated placement.
    """
    iy = np.minimum(np.arange(shape[0]) // stride, sparse.shape[0] - 1)
    ix = np.minimum(np.arange(shape[1]) // stride, sparse.shape[1] - 1)
    return sparse[np.ix_(iy, ix)]


class FeatureMatcher:
    def __init__(self, ref_map: GrayImage, radius: int, cfg: FeatureConfig):
        self.cfg = cfg
        self.radius = radius
        self.tiles = 2 * radius // cfg.subpatch_size
        h, w = ref_map.shape
        side = 2 * radius + 1
        if side > h or side > w:
            raise GeometryError(f"patch side {side} exceeds map size {w}x{h}")
        self.out_shape = (h - 2 * radius, w - 2 * radius)
        self.kps, self.desc, self.resp = detect_and_describe(ref_map.data, cfg.detector_threshold)
        self._tile_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def map_tile(self, x0: int, y0: int):
        """Keypoints/descriptors of the map sub-patch with top-left (x0, y0)."""
        key = (x0, y0)
        hit = self._tile_cache.get(key)
        if hit is None:
            s, m = self.cfg.subpatch_size, MARGIN
            x, y = self.kps[:, 0], self.kps[:, 1]
            sel = (x >= x0 + m) & (x < x0 + s - m) & (y >= y0 + m) & (y < y0 + s - m)
            kps, desc = strongest(self.kps[sel], self.desc[sel], self.resp[sel], self.cfg.max_keypoints)
            hit = (kps - np.array([x0, y0]), desc)
            self._tile_cache[key] = hit
        return hit

    def query_tiles(self, pixels: np.ndarray):
        s = self.cfg.subpatch_size
        tiles = []
        for j in range(self.tiles):
            for i in range(self.tiles):
                sub = pixels[j * s:(j + 1) * s, i * s:(i + 1) * s]
                tiles.append((i, j, *tile_features(sub, self.cfg)))
        return tiles

    def placement_score(self, tiles, px: int, py: int) -> float:
        s = self.cfg.subpatch_size
        total = 0.0
        for i, j, kq, dq in tiles:
            kr, dr = self.map_tile(px + i * s, py + j * s)
            total += inlier_ratio(kq, dq, kr, dr, self.cfg)
        return total / len(tiles)

    def __call__(self, patch: Patch) -> ScoreField:
        if patch.radius != self.radius:
            raise ConstraintError(f"matcher built for radius {self.radius}, got {patch.radius}")
        stride = self.cfg.stride
        gy = stride_positions(self.out_shape[0], stride)
        gx = stride_positions(self.out_shape[1], stride)
        tiles = self.query_tiles(patch.pixels.data)
        sparse = np.zeros((len(gy), len(gx)))
        if any(len(t[2]) for t in tiles):
            for a, py in enumerate(gy):
                for b, px in enumerate(gx):
                    sparse[a, b] = self.placement_score(tiles, int(px), int(py))
        scores = densify(sparse, self.out_shape, stride)
        evaluated = np.zeros(self.out_shape, dtype=bool)
        evaluated[np.ix_(gy, gx)] = True
        return ScoreField(scores, PixelPos(self.radius, self.radius), evaluated)


class FeatureFrontEnd(FrontEnd):
    """Sub-patch local-feature matching.

    A radius ``r`` is admissible when ``2r`` is a positive multiple of the
    sub-patch size; the tiles cover the first ``2r`` rows and columns of the
    ``2r + 1`` patch. Query centres live on the stride lattice.
    """

    name = "feature"
    score_bounds = (0.0, 1.0)

    def __init__(self, cfg: FeatureConfig | None = None):
        self.cfg = cfg or FeatureConfig()

    @property
    def center_step(self) -> int:
        return self.cfg.stride

    def admissible(self, radius: int) -> bool:
        return radius >= 1 and (2 * radius) % self.cfg.subpatch_size == 0

    def check_radius(self, radius: int) -> None:
        if not self.admissible(radius):
            raise ConstraintError(
                f"patch radius {radius} gives side {2 * radius} (+1), not a multiple of "
                f"sub-patch size {self.cfg.subpatch_size}"
            )

    def admissible_radii(self, max_radius: int) -> list[int]:
        half = self.cfg.subpatch_size // 2 if self.cfg.subpatch_size % 2 == 0 else self.cfg.subpatch_size
        return list(range(half, max_radius + 1, half))

    def matcher(self, ref_map: GrayImage, radius: int) -> FeatureMatcher:
        self.check_radius(radius)
        return FeatureMatcher(ref_map, radius, self.cfg)

    def to_config(self) -> dict:
        return {"name": self.name, **asdict(self.cfg)}


def feature_score_field(patch: Patch, ref_map: GrayImage, cfg: FeatureConfig | None = None) -> ScoreField:
    return FeatureFrontEnd(cfg).score_field(patch, ref_map)
