"""Coverage calibration: sweep patch radii, measure how well ground-truth
scores separate from impostor scores, and pick the smallest radius whose
overlapping coefficient falls below the required threshold.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .datasets import AlignedPair, plan_samples
from .errors import ConfigError, ConstraintError, GeometryError
from .frontends import FrontEnd, ScoreField, extract_patch, make_front_end
from .imaging import PixelPos
from .stats import NormalFit, fit_normal, ovl_weitzman

log = logging.getLogger(__name__)

DEFAULT_RADII = (2, 3, 4, 6, 8, 11, 15, 20, 27, 36, 48, 60)
IMPOSTOR_CAP = 50_000


@dataclass(frozen=True)
class CalibrationConfig:
    radii: tuple[int, ...] = DEFAULT_RADII
    n_samples: int = 200
    ovl_threshold: float = 0.005
    match_tol: float = 5
    rng_seed: int = 0
    front_end: dict[str, Any] = field(default_factory=lambda: {"name": "ncc"})
    impostor_cap: int = IMPOSTOR_CAP
    distance: str = "chebyshev"

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
        if not self.radii:
            raise ConfigError("radii must be non-empty")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ConfigError("radii must be strictly increasing")
        if self.radii[0] < 1:
            raise ConfigError("radii must be >= 1")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if not 0.0 < self.ovl_threshold < 1.0:
            raise ConfigError("ovl_threshold must be in (0, 1)")
        if self.match_tol < 0:
            raise ConfigError("match_tol must be >= 0")
        if self.impostor_cap < 1:
            raise ConfigError("impostor_cap must be >= 1")
        if self.distance not in ("chebyshev", "euclidean"):
            raise ConfigError("distance must be 'chebyshev' or 'euclidean'")
        try:
            make_front_end(self.front_end)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad front_end: {exc}") from exc

    def make_front_end(self) -> FrontEnd:
        return make_front_end(self.front_end)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["radii"] = list(self.radii)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CalibrationConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown calibration keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class ScoreSample:
    truth_score: float
    impostor_scores: np.ndarray
    center: PixelPos | None = None


@dataclass(frozen=True)
class OvlCurve:
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pts = tuple((int(r), float(o)) for r, o in self.points)
        object.__setattr__(self, "points", pts)
        radii = [r for r, _ in pts]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("curve radii must be strictly increasing")
        if any(not 0.0 <= o <= 1.0 for _, o in pts):
            raise ValueError("curve OVL values must be in [0, 1]")

    @property
    def radii(self) -> list[int]:
        return [r for r, _ in self.points]

    @property
    def ovls(self) -> list[float]:
        return [o for _, o in self.points]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class CalibrationOutcome:
    selected_radius: float
    curve: OvlCurve
    config_snapshot: CalibrationConfig
    per_radius_samples: tuple[dict[str, Any], ...] = ()
    pair_name: str = ""
    dropped_radii: tuple[int, ...] = ()
    per_pair: tuple["CalibrationOutcome", ...] = ()

    @property
    def rounded_radius(self) -> int:
        return round_half_up(self.selected_radius)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "pair": self.pair_name,
            "selected_radius": self.selected_radius,
            "rounded_radius": self.rounded_radius,
            "curve": [{"radius": r, "ovl": o} for r, o in self.curve.points],
            "dropped_radii": list(self.dropped_radii),
            "per_radius": [dict(s) for s in self.per_radius_samples],
            "config": self.config_snapshot.to_dict(),
        }
        if self.per_pair:
            d["per_pair"] = [p.to_dict() for p in self.per_pair]
            d["per_pair_radii"] = [p.selected_radius for p in self.per_pair]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CalibrationOutcome":
        return cls(
            selected_radius=float(d["selected_radius"]),
            curve=OvlCurve(tuple((p["radius"], p["ovl"]) for p in d["curve"])),
            config_snapshot=CalibrationConfig.from_dict(d["config"]),
            per_radius_samples=tuple(d.get("per_radius", ())),
            pair_name=d.get("pair", ""),
            dropped_radii=tuple(d.get("dropped_radii", ())),
            per_pair=tuple(cls.from_dict(p) for p in d.get("per_pair", ())),
        )


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def distance_grid(shape: tuple[int, int], center_index: tuple[int, int], metric: str) -> np.ndarray:
    iy, ix = center_index
    dy = np.abs(np.arange(shape[0]) - iy)[:, None]
    dx = np.abs(np.arange(shape[1]) - ix)[None, :]
    if metric == "chebyshev":
        return np.maximum(dy, dx)
    return np.hypot(dy, dx)


def partition_scores(field_: ScoreField, center: PixelPos, match_tol: float,
                     metric: str = "chebyshev") -> tuple[float, np.ndarray]:
    """Split a score field into the best score near ``center`` and the rest.

    Only cells the front-end actually evaluated take part.
    """
    dist = distance_grid(field_.shape, field_.to_index(center), metric)
    evaluated = field_.evaluated_mask()
    near = (dist <= match_tol) & evaluated
    far = (dist > match_tol) & evaluated
    if not near.any():
        raise GeometryError(f"no evaluated placement within {match_tol} px of {tuple(center)}")
    if not far.any():
        raise GeometryError(f"no impostor placements farther than {match_tol} px from {tuple(center)}")
    return float(field_.scores[near].max()), field_.scores[far]


def _sample_rng(seed: int, radius: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(radius), int(index), 0x1F2]))


def _map_ordered(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def harvest_scores(pair: AlignedPair, radius: int, cfg: CalibrationConfig,
                   workers: int = 1) -> list[ScoreSample]:
    """Localise ``cfg.n_samples`` query patches and collect their scores.

    For each seeded query centre the truth score is the best score within
    ``match_tol`` of the true position and the impostor scores are all
    evaluated placements farther away (uniformly subsampled to at most
    ``impostor_cap``). Results do not depend on ``workers``.
    """
    fe = cfg.make_front_end()
    fe.check_radius(radius)
    plan = plan_samples(pair, radius, cfg.n_samples, cfg.rng_seed, "calibration", step=fe.center_step)
    matcher = fe.matcher(pair.reference, radius)

    def one(item):
        k, center = item
        field_ = matcher(extract_patch(pair.query, center, radius))
        truth, impostors = partition_scores(field_, center, cfg.match_tol, cfg.distance)
        if impostors.size > cfg.impostor_cap:
            idx = _sample_rng(cfg.rng_seed, radius, k).choice(impostors.size, cfg.impostor_cap, replace=False)
            impostors = impostors[np.sort(idx)]
        return ScoreSample(truth, np.array(impostors, dtype=np.float64), center)

    return _map_ordered(one, list(enumerate(plan.centers)), workers)


def fit_pools(samples: Sequence[ScoreSample]) -> tuple[NormalFit, NormalFit]:
    truth = fit_normal([s.truth_score for s in samples])
    impostors = fit_normal(np.concatenate([s.impostor_scores for s in samples]))
    return truth, impostors


def ovl_for_radius(samples: Sequence[ScoreSample], bounds: tuple[float, float]) -> float:
    """OVL between normals fitted to the pooled truth and impostor scores."""
    truth, impostors = fit_pools(samples)
    return ovl_weitzman(truth, impostors, bounds[0], bounds[1])


def select_operating_point(curve: OvlCurve, ovl_threshold: float) -> float:
    """Radius where the OVL curve first drops to ``ovl_threshold``.

    Linear interpolation between the last point above and the first point
    at or below the threshold. If the first point already qualifies its
    radius is returned; if none does, the largest radius.
    """
    if len(curve) == 0:
        raise ValueError("cannot select an operating point from an empty curve")
    pts = curve.points
    if pts[0][1] <= ovl_threshold:
        return float(pts[0][0])
    for (pa, oa), (pb, ob) in zip(pts, pts[1:]):
        if oa > ovl_threshold >= ob:
            return pa + (pb - pa) * (ovl_threshold - oa) / (ob - oa)
    return float(pts[-1][0])


def _summary(radius: int, ovl: float, truth: NormalFit, impostors: NormalFit) -> dict[str, Any]:
    return {
        "radius": radius,
        "ovl": ovl,
        "truth_mean": truth.mean,
        "truth_std": truth.std,
        "n_truth": truth.n,
        "impostor_mean": impostors.mean,
        "impostor_std": impostors.std,
        "n_impostor": impostors.n,
    }


def calibrate(pair: AlignedPair, cfg: CalibrationConfig, workers: int = 1) -> CalibrationOutcome:
    """Run the full radius sweep on one aligned pair.

    Radii that do not fit the pair, or that the front-end does not accept,
    are dropped with a warning; at least one must survive.
    """
    fe = cfg.make_front_end()
    points, summaries, dropped = [], [], []
    for radius in cfg.radii:
        try:
            samples = harvest_scores(pair, radius, cfg, workers=workers)
        except (GeometryError, ConstraintError) as exc:
            log.warning("dropping radius %d on %s: %s", radius, pair.name, exc)
            dropped.append(radius)
            continue
        truth, impostors = fit_pools(samples)
        ovl = ovl_weitzman(truth, impostors, *fe.score_bounds)
        log.info("%s radius %d: OVL %.6g", pair.name, radius, ovl)
        points.append((radius, ovl))
        summaries.append(_summary(radius, ovl, truth, impostors))
    if not points:
        raise GeometryError(f"pair {pair.name!r}: no radius in {list(cfg.radii)} fits")
    curve = OvlCurve(tuple(points))
    return CalibrationOutcome(
        selected_radius=select_operating_point(curve, cfg.ovl_threshold),
        curve=curve,
        config_snapshot=cfg,
        per_radius_samples=tuple(summaries),
        pair_name=pair.name,
        dropped_radii=tuple(dropped),
    )


def average_selected_radii(radii: Sequence[float]) -> int:
    """Arithmetic mean of per-pair radii, rounded half-up."""
    if not radii:
        raise ValueError("need at least one radius")
    return round_half_up(sum(radii) / len(radii))


def calibrate_multi(pairs: Sequence[AlignedPair], cfg: CalibrationConfig, workers: int = 1) -> CalibrationOutcome:
    """Calibrate each pair independently and average the selected radii.

    The returned ``curve`` is the mean OVL over the radii every pair kept;
    it is a diagnostic only and plays no part in the selection.
    """
    if not pairs:
        raise ValueError("calibrate_multi needs at least one pair")
    outcomes = [calibrate(p, cfg, workers=workers) for p in pairs]
    if len(outcomes) == 1:
        return outcomes[0]
    common = sorted(set.intersection(*(set(o.curve.radii) for o in outcomes)))
    lookup = [dict(o.curve.points) for o in outcomes]
    curve = OvlCurve(tuple((r, float(np.mean([lk[r] for lk in lookup]))) for r in common))
    return CalibrationOutcome(
        selected_radius=float(average_selected_radii([o.selected_radius for o in outcomes])),
        curve=curve,
        config_snapshot=cfg,
        pair_name="+".join(o.pair_name for o in outcomes),
        dropped_radii=tuple(sorted(set().union(*(o.dropped_radii for o in outcomes)))),
        per_pair=tuple(outcomes),
    )
