"""Aligned image pairs, manifests and seeded query-centre plans."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .errors import GeometryError, ImageLoadError, ManifestError
from .imaging import GrayImage, PixelPos, PreprocessConfig, load_image, preprocess, save_pgm

Purpose = Literal["calibration", "validation"]
MIN_OVERLAP = 8
MANIFEST_KEYS = {"name", "reference", "query", "offset", "preprocess", "notes"}


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Reference and query maps in identity pixel alignment.

    ``offset`` records the (dx, dy) that was cropped away on load; the stored
    images are already aligned so that ``query[y, x]`` corresponds to
    ``reference[y, x]``.
    """

    reference: GrayImage
    query: GrayImage
    name: str = "pair"
    offset: tuple[int, int] = (0, 0)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.reference.shape != self.query.shape:
            raise GeometryError(
                f"pair {self.name!r}: reference {self.reference.shape} and query "
                f"{self.query.shape} differ after alignment"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.reference.shape


@dataclass(frozen=True)
class SamplePlan:
    centers: list[PixelPos]
    seed: int
    purpose: Purpose
    radius: int

    def __len__(self):
        return len(self.centers)


def crop_to_overlap(reference: GrayImage, query: GrayImage, dx: int, dy: int):
    """Crop both images to their overlap, where query (x, y) sits on reference (x + dx, y + dy)."""
    hr, wr = reference.shape
    hq, wq = query.shape
    rx0, rx1 = max(0, dx), min(wr, wq + dx)
    ry0, ry1 = max(0, dy), min(hr, hq + dy)
    if rx1 - rx0 < 1 or ry1 - ry0 < 1:
        raise GeometryError(f"offset ({dx}, {dy}) leaves no overlap")
    ref = reference.data[ry0:ry1, rx0:rx1]
    qry = query.data[ry0 - dy:ry1 - dy, rx0 - dx:rx1 - dx]
    return GrayImage(ref), GrayImage(qry)


def _manifest_error(path, msg):
    return ManifestError(f"{path}: {msg}")


def parse_manifest(data: Any, path="<manifest>") -> dict[str, Any]:
    if not isinstance(data, dict):
        raise _manifest_error(path, "manifest must be a JSON object")
    unknown = set(data) - MANIFEST_KEYS
    if unknown:
        raise _manifest_error(path, f"unknown keys {sorted(unknown)}")
    for key in ("name", "reference", "query"):
        if not isinstance(data.get(key), str) or not data[key]:
            raise _manifest_error(path, f"missing or non-string {key!r}")
    offset = data.get("offset", [0, 0])
    if (not isinstance(offset, list) or len(offset) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in offset)):
        raise _manifest_error(path, "'offset' must be a list of two integers")
    pre = data.get("preprocess", {})
    if not isinstance(pre, dict) or set(pre) - {"target_width", "patchnorm_radius"}:
        raise _manifest_error(path, "'preprocess' must be an object with target_width / patchnorm_radius")
    try:
        pre_cfg = PreprocessConfig(target_width=pre.get("target_width"),
                                   patchnorm_radius=pre.get("patchnorm_radius"))
    except (TypeError, ValueError) as exc:
        raise _manifest_error(path, f"bad preprocess block: {exc}") from exc
    return {
        "name": data["name"],
        "reference": data["reference"],
        "query": data["query"],
        "offset": (offset[0], offset[1]),
        "preprocess": pre_cfg,
        "notes": data.get("notes"),
    }


def load_pair(manifest_path, min_overlap: int = MIN_OVERLAP) -> AlignedPair:
    """Load, align and preprocess the pair described by a JSON manifest.

    Image paths are resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ImageLoadError(f"{manifest_path}: no such manifest") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _manifest_error(manifest_path, f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    m = parse_manifest(raw, manifest_path)
    base = manifest_path.parent
    reference = load_image(base / m["reference"])
    query = load_image(base / m["query"])
    dx, dy = m["offset"]
    reference, query = crop_to_overlap(reference, query, dx, dy)
    if min(reference.shape) < min_overlap:
        raise GeometryError(
            f"{manifest_path}: overlap {reference.width}x{reference.height} smaller than {min_overlap} px"
        )
    reference = preprocess(reference, m["preprocess"])
    query = preprocess(query, m["preprocess"])
    provenance = {"manifest": str(manifest_path)}
    if m["notes"] is not None:
        provenance["notes"] = m["notes"]
    return AlignedPair(reference, query, name=m["name"], offset=(dx, dy), provenance=provenance)


def save_pair(pair: AlignedPair, out_dir, notes: Any = None) -> Path:
    """Write ``reference.pgm``, ``query.pgm`` and a loadable ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_pgm(pair.reference, out_dir / "reference.pgm")
    save_pgm(pair.query, out_dir / "query.pgm")
    manifest = {
        "name": pair.name,
        "reference": "reference.pgm",
        "query": "query.pgm",
        "offset": [0, 0],
        "preprocess": {"target_width": pair.reference.width},
    }
    if notes is not None:
        manifest["notes"] = notes
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def admissible_axes(shape: tuple[int, int], radius: int, step: int = 1) -> tuple[np.ndarray, np.ndarray]:
    h, w = shape
    return np.arange(radius, w - radius, step), np.arange(radius, h - radius, step)


def count_admissible(shape: tuple[int, int], radius: int, step: int = 1) -> int:
    xs, ys = admissible_axes(shape, radius, step)
    return len(xs) * len(ys)


def _center_order(count: int, seed: int, radius: int, step: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(radius), int(step), 0x5A4D])
    return np.random.default_rng(ss).permutation(count)


def plan_samples(pair: AlignedPair, radius: int, n: int, seed: int,
                 purpose: Purpose = "calibration", step: int = 1) -> SamplePlan:
    """Draw ``n`` distinct query centres where a ``radius`` patch fits.

    All admissible centres (optionally restricted to a lattice of pitch
    ``step``) are put in one seeded order; calibration plans read it from the
    front and validation plans from the back, so the two never share a
    centre while ``n_cal + n_val`` does not exceed the admissible count.
    """
    if purpose not in ("calibration", "validation"):
        raise ValueError(f"unknown purpose {purpose!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    xs, ys = admissible_axes(pair.shape, radius, step)
    count = len(xs) * len(ys)
    if count < n:
        raise GeometryError(
            f"pair {pair.name!r}: only {count} admissible centres for radius {radius}, need {n}"
        )
    order = _center_order(count, seed, radius, step)
    picked = order[:n] if purpose == "calibration" else order[::-1][:n]
    iy, ix = np.divmod(picked, len(xs))
    centers = [PixelPos(int(xs[a]), int(ys[b])) for a, b in zip(ix, iy)]
    return SamplePlan(centers=centers, seed=seed, purpose=purpose, radius=radius)
