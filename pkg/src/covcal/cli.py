"""Command-line driver: ``covcal {calibrate,evaluate,synth,sweep}``.

Every command reads one JSON run config. Relative manifest paths inside it
are resolved against the config file's directory. A config may contain:

``calibration``   CalibrationConfig fields
``pairs``         list of manifest paths
``synthetic``     list of ``{"name", "surface", "perturb"}`` objects
``evaluation``    EvalConfig fields, plus an optional ``pair`` name
``sweep``         ``{"radii", "n_queries", "repeats"}``
``surface`` / ``perturb`` / ``name``   the single pair built by ``synth``

Exit codes: 0 success, 1 configuration error, 2 data error, 3 compute error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import plotting
from .calibration import CalibrationConfig, CalibrationOutcome, calibrate, calibrate_multi
from .datasets import AlignedPair, load_pair, plan_samples, save_pair
from .errors import ConfigError, CovcalError, DataError, ImageLoadError
from .evaluation import EvalConfig, evaluate, time_localize
from .imaging import quantize
from .synthdata import PerturbSpec, SurfaceSpec, make_aligned_pair, generate_surface

log = logging.getLogger("covcal")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
RUN_KEYS = {"calibration", "pairs", "synthetic", "evaluation", "sweep", "surface", "perturb", "name"}
SWEEP_DEFAULTS = {"radii": [4, 8, 16, 32], "n_queries": 20, "repeats": 3}


@dataclass
class RunConfig:
    path: Path
    calibration: CalibrationConfig
    manifests: list[Path] = field(default_factory=list)
    synthetic: list[tuple[str, SurfaceSpec, PerturbSpec]] = field(default_factory=list)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    eval_pair: str | None = None
    sweep: dict[str, Any] = field(default_factory=lambda: dict(SWEEP_DEFAULTS))

    @property
    def n_pairs(self) -> int:
        return len(self.manifests) + len(self.synthetic)

    def load_pairs(self) -> list[AlignedPair]:
        pairs = [load_pair(p) for p in self.manifests]
        for name, surface, perturb in self.synthetic:
            pairs.append(build_synthetic(name, surface, perturb))
        return pairs


def build_synthetic(name: str, surface: SurfaceSpec, perturb: PerturbSpec) -> AlignedPair:
    """Synthetic pair snapped to 8 bits, so it equals what ``synth`` writes to disk."""
    pair = make_aligned_pair(generate_surface(surface), perturb, name=name, surface_spec=surface)
    return AlignedPair(quantize(pair.reference), quantize(pair.query), pair.name, provenance=pair.provenance)


# --- config parsing -------------------------------------------------------

def _key_line(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _config_error(path: Path, text: str, key: str | None, msg: str) -> ConfigError:
    line = _key_line(text, key) if key else None
    return ConfigError(f"{path}:{line or 1}: {msg}")


def read_json_config(path: Path) -> tuple[dict[str, Any], str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    unknown = set(raw) - RUN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise _config_error(path, text, key, f"unknown key {key!r}")
    return raw, text


def _spec(cls, data: Any, path: Path, text: str, key: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise _config_error(path, text, key, f"{key!r} must be an object")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise _config_error(path, text, key, f"invalid {key!r}: {exc}") from exc


def _with_seed(spec, seed: int | None):
    if seed is None:
        return spec
    return type(spec)(**{**spec.__dict__, "seed": seed})


def parse_run_config(path, seed: int | None = None) -> RunConfig:
    """Validate the whole config up front; nothing is computed here."""
    path = Path(path)
    raw, text = read_json_config(path)
    cal = dict(raw.get("calibration") or {})
    if not isinstance(raw.get("calibration", {}), dict):
        raise _config_error(path, text, "calibration", "'calibration' must be an object")
    if seed is not None:
        cal["rng_seed"] = seed
    try:
        calibration = CalibrationConfig.from_dict(cal)
    except ConfigError as exc:
        raise _config_error(path, text, "calibration", str(exc)) from exc

    manifests = raw.get("pairs", [])
    if not isinstance(manifests, list) or not all(isinstance(m, str) for m in manifests):
        raise _config_error(path, text, "pairs", "'pairs' must be a list of manifest paths")
    synthetic = []
    entries = raw.get("synthetic", [])
    if not isinstance(entries, list):
        raise _config_error(path, text, "synthetic", "'synthetic' must be a list")
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or set(entry) - {"name", "surface", "perturb"}:
            raise _config_error(path, text, "synthetic", f"synthetic[{i}] must have only name/surface/perturb")
        surface = _with_seed(_spec(SurfaceSpec, entry.get("surface"), path, text, "surface"), seed)
        perturb = _with_seed(_spec(PerturbSpec, entry.get("perturb"), path, text, "perturb"), seed)
        synthetic.append((str(entry.get("name") or f"synthetic-{i}"), surface, perturb))

    ev = dict(raw.get("evaluation") or {})
    eval_pair = ev.pop("pair", None)
    try:
        evaluation = EvalConfig.from_dict(ev)
    except ConfigError as exc:
        raise _config_error(path, text, "evaluation", str(exc)) from exc

    sweep = {**SWEEP_DEFAULTS, **(raw.get("sweep") or {})}
    if set(sweep) - set(SWEEP_DEFAULTS):
        raise _config_error(path, text, "sweep", f"unknown sweep keys {sorted(set(sweep) - set(SWEEP_DEFAULTS))}")
    radii = sweep["radii"]
    if (not isinstance(radii, list) or not radii
            or not all(isinstance(r, int) and not isinstance(r, bool) and r >= 1 for r in radii)):
        raise _config_error(path, text, "sweep", "sweep radii must be a non-empty list of positive integers")
    if not (isinstance(sweep["n_queries"], int) and sweep["n_queries"] >= 1
            and isinstance(sweep["repeats"], int) and sweep["repeats"] >= 1):
        raise _config_error(path, text, "sweep", "n_queries and repeats must be positive integers")

    return RunConfig(
        path=path,
        calibration=calibration,
        manifests=[(path.parent / m) for m in manifests],
        synthetic=synthetic,
        evaluation=evaluation,
        eval_pair=eval_pair,
        sweep=sweep,
    )


# --- output helpers ---------------------------------------------------------

def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out_dir / name).write_text(content, encoding="utf-8", newline="\n")


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- commands -----------------------------------------------------------------

def cmd_calibrate(config_path, output_dir, *, seed: int | None = None, threads: int | None = None,
                  plots: bool = False, multi: bool = False) -> int:
    cfg = parse_run_config(config_path, seed)
    if cfg.n_pairs == 0:
        raise ConfigError(f"{cfg.path}:1: calibrate needs at least one entry in 'pairs' or 'synthetic'")
    if cfg.n_pairs > 1 and not multi:
        raise ConfigError(f"{cfg.path}:1: {cfg.n_pairs} pairs given; pass --multi to average them")
    pairs = cfg.load_pairs()
    workers = threads or os.cpu_count() or 1
    outcome = calibrate_multi(pairs, cfg.calibration, workers) if len(pairs) > 1 else \
        calibrate(pairs[0], cfg.calibration, workers)
    files = {
        "calibration.json": _dump(outcome.to_dict()),
        "ovl_curve.csv": _csv(("radius", "ovl"), outcome.curve.points),
    }
    if plots:
        files["ovl_curve.svg"] = plotting.ovl_curve_svg(outcome.curve.radii, outcome.curve.ovls,
                                                        cfg.calibration.ovl_threshold, outcome.selected_radius)
    _write(Path(output_dir), files)
    log.info("selected radius %.6g", outcome.selected_radius)
    return 0


def load_calibration(path) -> CalibrationOutcome:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ImageLoadError(f"{path}: calibration file not found") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    try:
        return CalibrationOutcome.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a calibration result: {exc}") from exc


def _eval_target(cfg: RunConfig) -> AlignedPair:
    pairs = cfg.load_pairs()
    if cfg.eval_pair is not None:
        named = [p for p in pairs if p.name == cfg.eval_pair]
        if not named:
            raise ConfigError(f"{cfg.path}: evaluation pair {cfg.eval_pair!r} not in config")
        return named[0]
    if len(pairs) != 1:
        raise ConfigError(f"{cfg.path}: {len(pairs)} pairs given; set evaluation.pair to choose one")
    return pairs[0]


def cmd_evaluate(config_path, calibration_json, output_dir, *, seed: int | None = None,
                 plots: bool = False) -> int:
    cfg = parse_run_config(config_path, seed)
    if cfg.n_pairs == 0:
        raise ConfigError(f"{cfg.path}:1: evaluate needs at least one entry in 'pairs' or 'synthetic'")
    outcome = load_calibration(calibration_json)
    eval_cfg = cfg.evaluation
    if seed is not None:
        eval_cfg = EvalConfig(eval_cfg.radii, eval_cfg.m_samples, eval_cfg.match_tol, seed)
    report = evaluate(_eval_target(cfg), outcome, eval_cfg)
    files = {"eval.csv": report.to_csv(), "eval.json": report.to_json()}
    if plots:
        radii = [r.radius for r in report.per_radius]
        files["recall.svg"] = plotting.recall_svg(radii, [r.recall for r in report.per_radius],
                                                  report.selected_radius)
        files["m_metric.svg"] = plotting.m_metric_svg(radii, [r.m_metric for r in report.per_radius],
                                                      report.selected_radius, report.m_at_selected)
    _write(Path(output_dir), files)
    return 0


def parse_synth_spec(path, seed: int | None = None) -> tuple[str, SurfaceSpec, PerturbSpec]:
    path = Path(path)
    raw, text = read_json_config(path)
    extra = set(raw) - {"surface", "perturb", "name"}
    if extra:
        raise _config_error(path, text, sorted(extra)[0], "synth spec takes only surface/perturb/name")
    surface = _with_seed(_spec(SurfaceSpec, raw.get("surface"), path, text, "surface"), seed)
    perturb = _with_seed(_spec(PerturbSpec, raw.get("perturb"), path, text, "perturb"), seed)
    name = raw.get("name") or f"synth-s{surface.seed}-p{perturb.seed}"
    return str(name), surface, perturb


def cmd_synth(spec_path, output_dir, *, seed: int | None = None) -> int:
    name, surface, perturb = parse_synth_spec(spec_path, seed)
    pair = build_synthetic(name, surface, perturb)
    notes = {"surface": surface.__dict__, "perturb": perturb.__dict__, "ground_truth": "identity"}
    save_pair(pair, output_dir, notes=notes)
    return 0


def cmd_sweep(config_path, output_dir, *, seed: int | None = None, plots: bool = False) -> int:
    cfg = parse_run_config(config_path, seed)
    if cfg.n_pairs == 0:
        raise ConfigError(f"{cfg.path}:1: sweep needs at least one entry in 'pairs' or 'synthetic'")
    pair = cfg.load_pairs()[0]
    fe = cfg.calibration.make_front_end()
    rows = []
    for radius in cfg.sweep["radii"]:
        fe.check_radius(radius)
        plan = plan_samples(pair, radius, cfg.sweep["n_queries"], cfg.calibration.rng_seed,
                            "validation", step=fe.center_step)
        t = time_localize(pair.reference, pair.query, radius, fe, plan.centers, cfg.sweep["repeats"])
        log.info("radius %d: %.6g s", radius, t)
        rows.append((radius, t))
    files = {"timing.csv": _csv(("radius", "mean_time_s"), rows)}
    if plots:
        files["timing.svg"] = plotting.timing_svg([r for r, _ in rows], [t for _, t in rows])
    _write(Path(output_dir), files)
    return 0


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covcal", description="Patch-radius calibration for map-based localisation.")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", required=True, type=Path, help="JSON run config")
    shared.add_argument("--out", required=True, type=Path, help="output directory")
    shared.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    shared.add_argument("--threads", type=int, default=None, help="worker cap (default: CPU count)")
    shared.add_argument("--plots", action="store_true", help="also write SVG plots")
    sub = parser.add_subparsers(dest="command", required=True)
    cal = sub.add_parser("calibrate", parents=[shared], help="sweep radii and select one")
    cal.add_argument("--multi", action="store_true", help="average the selection over all configured pairs")
    ev = sub.add_parser("evaluate", parents=[shared], help="recall and efficiency per radius")
    ev.add_argument("--calibration", required=True, type=Path, help="calibration.json from 'calibrate'")
    sub.add_parser("synth", parents=[shared], help="write a synthetic aligned pair")
    sub.add_parser("sweep", parents=[shared], help="time localisation per radius")
    return parser


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("COVCAL_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("covcal").setLevel(level)


def run(args: argparse.Namespace) -> int:
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.command == "calibrate":
        return cmd_calibrate(args.config, args.out, seed=args.seed, threads=args.threads,
                             plots=args.plots, multi=args.multi)
    if args.command == "evaluate":
        return cmd_evaluate(args.config, args.calibration, args.out, seed=args.seed, plots=args.plots)
    if args.command == "synth":
        return cmd_synth(args.config, args.out, seed=args.seed)
    return cmd_sweep(args.config, args.out, seed=args.seed, plots=args.plots)


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (CovcalError, ValueError, ArithmeticError, MemoryError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
