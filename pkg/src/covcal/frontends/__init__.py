"""Localisation front-ends producing dense score fields."""

from .base import FrontEnd, Patch, ScoreField, best_placement, check_fits, extract_patch, localize
from .features import FeatureConfig, FeatureFrontEnd, feature_score_field
from .ncc import NCCFrontEnd, ncc_score_field

__all__ = [
    "FeatureConfig",
    "FeatureFrontEnd",
    "FrontEnd",
    "NCCFrontEnd",
    "Patch",
    "ScoreField",
    "best_placement",
    "check_fits",
    "extract_patch",
    "feature_score_field",
    "localize",
    "make_front_end",
    "ncc_score_field",
]


def make_front_end(spec: dict | None = None) -> FrontEnd:
    """Build a front-end from a ``{"name": ..., **options}`` mapping."""
    spec = dict(spec or {"name": "ncc"})
    name = spec.pop("name", "ncc")
    if name == "ncc":
        if spec:
            raise ValueError(f"ncc front-end takes no options, got {sorted(spec)}")
        return NCCFrontEnd()
    if name == "feature":
        try:
            return FeatureFrontEnd(FeatureConfig(**spec))
        except TypeError as exc:
            raise ValueError(f"bad feature options: {exc}") from exc
    raise ValueError(f"unknown front-end {name!r}")
