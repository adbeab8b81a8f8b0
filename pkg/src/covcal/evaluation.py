"""Validation harness: recall per radius, the ground-truth optimal radius and
the max recall-to-computation efficiency metric.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .calibration import CalibrationOutcome, round_half_up
from .datasets import AlignedPair, plan_samples
from .errors import ConfigError
from .frontends import FrontEnd, best_placement, extract_patch, localize, make_front_end
from .imaging import GrayImage, PixelPos

RECALL_FRACTION = 0.95
CSV_COLUMNS = ("radius", "recall", "mean_time_s", "m_metric")


@dataclass(frozen=True)
class EvalConfig:
    radii: tuple[int, ...] | None = None  # None: reuse the calibration radii
    m_samples: int = 1000
    match_tol: float | None = None  # None: reuse the calibration match_tol
    seed: int | None = None  # None: reuse the calibration seed

    def __post_init__(self):
        if self.radii is not None:
            object.__setattr__(self, "radii", tuple(int(r) for r in self.radii))
            if not self.radii or min(self.radii) < 1:
                raise ConfigError("evaluation radii must be non-empty and >= 1")
        if self.m_samples < 1:
            raise ConfigError("m_samples must be >= 1")
        if self.match_tol is not None and self.match_tol < 0:
            raise ConfigError("match_tol must be >= 0")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown evaluation keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class RadiusEval:
    radius: int
    recall: float
    mean_time: float
    m_metric: float | None = None


@dataclass
class EvalReport:
    per_radius: list[RadiusEval]
    p_g: int
    selected_radius: float
    m_at_selected: float
    pair_name: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair": self.pair_name,
            "p_g": self.p_g,
            "selected_radius": self.selected_radius,
            "rounded_selected_radius": round_half_up(self.selected_radius),
            "m_at_selected": self.m_at_selected,
            "per_radius": [asdict(r) for r in self.per_radius],
            **self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.per_radius:
            writer.writerow([r.radius, f"{r.recall:.9g}", f"{r.mean_time:.9g}", f"{r.m_metric:.9g}"])
        return buf.getvalue()


def is_true_match(best: PixelPos, truth: PixelPos, match_tol: float) -> bool:
    return max(abs(best.x - truth.x), abs(best.y - truth.y)) <= match_tol


def recall_at_radius(pair: AlignedPair, radius: int, m_samples: int, match_tol: float,
                     front_end: FrontEnd, seed: int) -> tuple[float, float]:
    """Fraction of validation queries localised within ``match_tol`` (Chebyshev).

    Query centres come from the validation end of the seeded centre order, so
    they never coincide with calibration centres drawn with the same seed.
    ``mean_time`` is the mean wall-clock time of the localisation calls
    alone (score field plus argmax), excluding sampling and map preparation.
    """
    front_end.check_radius(radius)
    plan = plan_samples(pair, radius, m_samples, seed, "validation", step=front_end.center_step)
    matcher = front_end.matcher(pair.reference, radius)
    hits = 0
    elapsed = 0.0
    for center in plan.centers:
        patch = extract_patch(pair.query, center, radius)
        t0 = time.perf_counter()
        best, _ = best_placement(matcher(patch))
        elapsed += time.perf_counter() - t0
        hits += is_true_match(best, center, match_tol)
    return hits / m_samples, max(elapsed / m_samples, 1e-12)


def ground_truth_optimal_radius(per_radius: Sequence[RadiusEval]) -> int:
    """Smallest radius reaching 95% of the best recall in the list."""
    if not per_radius:
        raise ValueError("need at least one evaluated radius")
    target = RECALL_FRACTION * max(r.recall for r in per_radius)
    return min(r.radius for r in per_radius if r.recall >= target)


def m_metric(p_i: float, p_g: float, all_radii: Sequence[float]) -> float:
    """Max recall-to-computation efficiency: 1 at ``p_g``, 0 at the farthest radius."""
    if not all_radii:
        raise ValueError("all_radii must be non-empty")
    norm = max(abs(p - p_g) for p in all_radii)
    if norm == 0:
        return 1.0
    return 1.0 - abs(p_i - p_g) / norm


def evaluate(pair: AlignedPair, outcome: CalibrationOutcome, eval_cfg: EvalConfig | None = None) -> EvalReport:
    """Measure recall and timing over the evaluation grid plus the selected radius."""
    eval_cfg = eval_cfg or EvalConfig()
    cal = outcome.config_snapshot
    fe = make_front_end(cal.front_end)
    match_tol = cal.match_tol if eval_cfg.match_tol is None else eval_cfg.match_tol
    seed = cal.rng_seed if eval_cfg.seed is None else eval_cfg.seed
    radii = set(eval_cfg.radii if eval_cfg.radii is not None else outcome.curve.radii)
    selected = evaluable_radius(fe, outcome.selected_radius)
    radii.add(selected)
    per_radius = []
    for radius in sorted(radii):
        if not fe.admissible(radius):
            continue
        recall, mean_time = recall_at_radius(pair, radius, eval_cfg.m_samples, match_tol, fe, seed)
        per_radius.append(RadiusEval(radius, recall, mean_time))
    p_g = ground_truth_optimal_radius(per_radius)
    all_radii = [r.radius for r in per_radius]
    for r in per_radius:
        r.m_metric = m_metric(r.radius, p_g, all_radii)
    m_sel = m_metric(selected, p_g, all_radii)
    return EvalReport(per_radius, p_g, outcome.selected_radius, m_sel, pair_name=pair.name)


def evaluable_radius(front_end: FrontEnd, radius: float) -> int:
    """Round a (possibly fractional) selected radius to one the front-end accepts.

    Rounds half-up, then moves to the nearest admissible radius (the larger
    one on a tie).
    """
    r = round_half_up(radius)
    if front_end.admissible(r):
        return r
    for d in range(1, r + 1):
        if front_end.admissible(r + d):
            return r + d
        if r - d >= 1 and front_end.admissible(r - d):
            return r - d
    raise ConfigError(f"no admissible radius near {radius}")


def time_localize(ref_map: GrayImage, query_map: GrayImage, radius: int, front_end: FrontEnd,
                  centers: Sequence[PixelPos], repeats: int = 3) -> float:
    """Median over ``repeats`` of the mean time of a full ``localize`` call.

    Unlike ``recall_at_radius`` this includes the per-call map preparation,
    which is what a single-shot localisation pays.
    """
    patches = [extract_patch(query_map, c, radius) for c in centers]
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for patch in patches:
            localize(front_end, patch, ref_map)
        runs.append((time.perf_counter() - t0) / len(patches))
    return float(np.median(runs))
