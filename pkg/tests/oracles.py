"""Slow, obviously-correct reference implementations used only by the tests.

Nothing here imports the optimised code paths it checks.
"""

from __future__ import annotations

import math

import numpy as np


def brute_ncc(patch: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Zero-normalised cross-correlation by a straight double loop over placements."""
    ph, pw = patch.shape
    h, w = ref.shape
    out = np.zeros((h - ph + 1, w - pw + 1))
    n = patch.size
    p = patch - patch.mean()
    sp = math.sqrt((p * p).sum() / n)
    for y in range(out.shape[0]):
        for x in range(out.shape[1]):
            win = ref[y:y + ph, x:x + pw]
            wc = win - win.mean()
            sw = math.sqrt((wc * wc).sum() / n)
            if sp < 1e-12 or sw < 1e-12:
                continue
            out[y, x] = (p * wc).sum() / (sp * sw * n)
    return out


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def ovl_equal_variance(delta_mu: float, sigma: float) -> float:
    """Closed-form overlap of two normals sharing ``sigma``."""
    return 2.0 * normal_cdf(-abs(delta_mu) / (2.0 * sigma))


def ovl_quadrature(m1, s1, m2, s2, k0, k1) -> float:
    """Overlap by adaptive quadrature, split at the density crossings."""
    from scipy.integrate import quad

    def pdf(x, m, s):
        return math.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))

    cuts = sorted({k0, k1, m1, m2, *(c for c in _crossings(m1, s1, m2, s2) if k0 < c < k1)})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        total += quad(lambda x: min(pdf(x, m1, s1), pdf(x, m2, s2)), a, b, limit=200,
                      epsabs=1e-13, epsrel=1e-11)[0]
    return total


def _crossings(m1, s1, m2, s2):
    # log pdf1 == log pdf2 is a quadratic in x
    a = 1 / (2 * s2 ** 2) - 1 / (2 * s1 ** 2)
    b = m1 / s1 ** 2 - m2 / s2 ** 2
    c = m2 ** 2 / (2 * s2 ** 2) - m1 ** 2 / (2 * s1 ** 2) + math.log(s2 / s1)
    if abs(a) < 1e-15:
        return [-c / b] if b else []
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return [(-b - r) / (2 * a), (-b + r) / (2 * a)]


def window_mean_std(img: np.ndarray, y: int, x: int, radius: int) -> tuple[float, float]:
    """Mean and population std over the border-clipped window, by explicit loops."""
    vals = []
    for yy in range(y - radius, y + radius + 1):
        for xx in range(x - radius, x + radius + 1):
            if 0 <= yy < img.shape[0] and 0 <= xx < img.shape[1]:
                vals.append(float(img[yy, xx]))
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    return mean, math.sqrt(var)


def naive_matches(dq: np.ndarray, dr: np.ndarray, max_hamming: int) -> list[tuple[int, int]]:
    """Mutual nearest neighbours by comparing every descriptor pair one at a time."""
    def ham(a, b):
        return sum(1 for u, v in zip(a, b) if u != v)

    if len(dq) == 0 or len(dr) == 0:
        return []
    d = [[ham(a, b) for b in dr] for a in dq]
    fwd = [min(range(len(dr)), key=lambda j: (row[j], j)) for row in d]
    bwd = [min(range(len(dq)), key=lambda i: (d[i][j], i)) for j in range(len(dr))]
    return [(i, j) for i, j in enumerate(fwd) if bwd[j] == i and d[i][j] <= max_hamming]


def naive_placement_score(query: np.ndarray, ref: np.ndarray, px: int, py: int, tiles: int, cfg,
                          detect) -> float:
    """Mean inlier ratio over sub-patches, detecting on each cropped sub-patch separately."""
    s = cfg.subpatch_size
    ratios = []
    for j in range(tiles):
        for i in range(tiles):
            kq, dq = detect(query[j * s:(j + 1) * s, i * s:(i + 1) * s])
            kr, dr = detect(ref[py + j * s:py + (j + 1) * s, px + i * s:px + (i + 1) * s])
            m = naive_matches(dq, dr, cfg.max_hamming)
            inl = sum(1 for a, b in m
                      if math.hypot(kr[b][0] - kq[a][0], kr[b][1] - kq[a][1]) <= cfg.inlier_tol)
            ratios.append(inl / max(1, len(m)))
    return sum(ratios) / len(ratios)


def double_loop_autocorrelation(img: np.ndarray, dy: int, dx: int) -> float:
    """Pearson correlation between the image and itself shifted by (dy, dx)."""
    h, w = img.shape
    a, b = [], []
    for y in range(h - dy):
        for x in range(w - dx):
            a.append(img[y, x])
            b.append(img[y + dy, x + dx])
    return float(np.corrcoef(a, b)[0, 1])
