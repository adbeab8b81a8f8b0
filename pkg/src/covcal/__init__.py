"""Patch-radius (sensor coverage) calibration for map-based visual localisation.

Sweep candidate patch radii over an aligned reference/query pair, fit normals
to the ground-truth and impostor localisation scores at each radius, and pick
the smallest radius whose overlapping coefficient drops below a threshold.
"""

from .calibration import (
    CalibrationConfig,
    CalibrationOutcome,
    OvlCurve,
    calibrate,
    calibrate_multi,
    select_operating_point,
)
from .datasets import AlignedPair, load_pair, plan_samples, save_pair
from .errors import (
    BoundsError,
    ConfigError,
    ConstraintError,
    CovcalError,
    DataError,
    FitError,
    GeometryError,
    ImageLoadError,
    ManifestError,
)
from .evaluation import EvalConfig, EvalReport, evaluate, m_metric
from .frontends import (
    FeatureConfig,
    FeatureFrontEnd,
    NCCFrontEnd,
    Patch,
    ScoreField,
    extract_patch,
    localize,
    make_front_end,
)
from .imaging import GrayImage, PixelPos, PreprocessConfig, load_image, preprocess
from .stats import NormalFit, fit_normal, ovl_weitzman
from .synthdata import PerturbSpec, SurfaceSpec, generate_surface, synthetic_pair

__version__ = "0.1.0"

__all__ = [
    "AlignedPair", "BoundsError", "CalibrationConfig", "CalibrationOutcome", "ConfigError",
    "ConstraintError", "CovcalError", "DataError", "EvalConfig", "EvalReport", "FeatureConfig",
    "FeatureFrontEnd", "FitError", "GeometryError", "GrayImage", "ImageLoadError", "ManifestError",
    "NCCFrontEnd", "NormalFit", "OvlCurve", "Patch", "PerturbSpec", "PixelPos", "PreprocessConfig",
    "ScoreField", "SurfaceSpec", "calibrate", "calibrate_multi", "evaluate", "extract_patch",
    "fit_normal", "generate_surface", "load_image", "load_pair", "localize", "m_metric",
    "make_front_end", "ovl_weitzman", "plan_samples", "preprocess", "save_pair",
    "select_operating_point", "synthetic_pair",
]
