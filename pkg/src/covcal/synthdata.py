"""Seeded synthetic surfaces and aligned reference/query pairs.

Surfaces are multi-octave value noise: uniform random lattice values,
bilinearly interpolated, summed over octaves of halving cell size and
stretched to [0, 1]. Part of the image can be replaced by a tiled motif to
create perceptual aliasing.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .datasets import AlignedPair
from .imaging import GrayImage


@dataclass(frozen=True)
class SurfaceSpec:
    width: int = 256
    height: int = 256
    texture_scale: float = 8.0
    uniqueness: float = 1.0
    seed: int = 0
    motif_size: int = 16
    octaves: int = 3

    def __post_init__(self):
        if self.width < 64 or self.height < 64:
            raise ValueError("surface dimensions must be >= 64")
        if not 0.0 <= self.uniqueness <= 1.0:
            raise ValueError("uniqueness must be in [0, 1]")
        if self.texture_scale < 1.0:
            raise ValueError("texture_scale must be >= 1")
        if self.motif_size < 2:
            raise ValueError("motif_size must be >= 2")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")


@dataclass(frozen=True)
class PerturbSpec:
    noise_sigma: float = 0.0
    brightness_shift: float = 0.0
    contrast_gain: float = 1.0
    occlusion_count: int = 0
    occlusion_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.contrast_gain <= 0:
            raise ValueError("contrast_gain must be > 0")
        if self.occlusion_count < 0 or self.occlusion_size < 0:
            raise ValueError("occlusion_count and occlusion_size must be >= 0")


def value_noise(height: int, width: int, cell: float, rng: np.random.Generator) -> np.ndarray:
    """One octave of lattice value noise with bilinear interpolation."""
    cell = max(float(cell), 1.0)
    gh = int(np.ceil((height - 1) / cell)) + 2
    gw = int(np.ceil((width - 1) / cell)) + 2
    lattice = rng.random((gh, gw))
    fy = np.arange(height) / cell
    fx = np.arange(width) / cell
    y0 = np.floor(fy).astype(int)
    x0 = np.floor(fx).astype(int)
    ty = (fy - y0)[:, None]
    tx = (fx - x0)[None, :]
    v00 = lattice[np.ix_(y0, x0)]
    v01 = lattice[np.ix_(y0, x0 + 1)]
    v10 = lattice[np.ix_(y0 + 1, x0)]
    v11 = lattice[np.ix_(y0 + 1, x0 + 1)]
    top = v00 + tx * (v01 - v00)
    bottom = v10 + tx * (v11 - v10)
    return top + ty * (bottom - top)


def fractal_noise(height: int, width: int, cell: float, octaves: int, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((height, width))
    amplitude = 1.0
    for _ in range(octaves):
        out += amplitude * value_noise(height, width, cell, rng)
        amplitude *= 0.5
        cell = max(cell / 2.0, 1.0)
    return _stretch(out)


def _stretch(a: np.ndarray) -> np.ndarray:
    lo, hi = a.min(), a.max()
    if hi - lo <= 0:
        return np.full_like(a, 0.5)
    return (a - lo) / (hi - lo)


def generate_surface(spec: SurfaceSpec) -> GrayImage:
    """Deterministic textured surface for ``spec``.

    With ``uniqueness < 1`` the leftmost ``round((1 - uniqueness) * width)``
    columns are tiled with a ``motif_size`` square motif; ``uniqueness == 0``
    gives an exactly periodic image.
    """
    rng = np.random.default_rng(spec.seed)
    img = fractal_noise(spec.height, spec.width, spec.texture_scale, spec.octaves, rng)
    band = int(np.floor((1.0 - spec.uniqueness) * spec.width + 0.5))
    if band > 0:
        m = spec.motif_size
        motif = fractal_noise(m, m, min(spec.texture_scale, m / 2.0), spec.octaves, rng)
        reps_y = -(-spec.height // m)
        reps_x = -(-band // m)
        img[:, :band] = np.tile(motif, (reps_y, reps_x))[:spec.height, :band]
    return GrayImage.clipped(img)


def perturb(surface: GrayImage, spec: PerturbSpec) -> GrayImage:
    """Appearance change: gain, shift, Gaussian noise, then constant-fill occlusions."""
    rng = np.random.default_rng(spec.seed)
    h, w = surface.shape
    noise = rng.standard_normal((h, w)) * spec.noise_sigma
    q = np.clip(spec.contrast_gain * surface.data + spec.brightness_shift + noise, 0.0, 1.0)
    size = spec.occlusion_size
    for _ in range(spec.occlusion_count):
        x0 = int(rng.integers(0, max(0, w - size) + 1))
        y0 = int(rng.integers(0, max(0, h - size) + 1))
        q[y0:y0 + size, x0:x0 + size] = rng.random()
    return GrayImage(q)


def make_aligned_pair(surface: GrayImage, spec: PerturbSpec, name: str = "synthetic",
                      surface_spec: SurfaceSpec | None = None) -> AlignedPair:
    provenance = {"generator": "covcal.synthdata", "perturb": asdict(spec), "ground_truth": "identity"}
    if surface_spec is not None:
        provenance["surface"] = asdict(surface_spec)
    return AlignedPair(surface, perturb(surface, spec), name=name, provenance=provenance)


def synthetic_pair(surface: SurfaceSpec, perturbation: PerturbSpec, name: str | None = None) -> AlignedPair:
    """Convenience: generate the surface and its perturbed query in one call."""
    name = name or f"synth-s{surface.seed}-p{perturbation.seed}"
    return make_aligned_pair(generate_surface(surface), perturbation, name=name, surface_spec=surface)
