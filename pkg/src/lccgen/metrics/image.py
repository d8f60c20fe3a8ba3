"""Multi-scale structural similarity and the mean-pairwise diversity score built on it."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..numeric import make_rng
from ..numeric.rng import SeedLike

MS_SSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
WINDOW = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable valid-mode correlation
    rows = np.tensordot(sliding_window_view(img, len(g), axis=0), g, axes=([-1], [0]))
    return np.tensordot(sliding_window_view(rows, len(g), axis=1), g, axes=([-1], [0]))


def _ssim_terms(a: np.ndarray, b: np.ndarray, g: np.ndarray, data_range: float):
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_a, mu_b = _filter(a, g), _filter(b, g)
    var_a = _filter(a * a, g) - mu_a * mu_a
    var_b = _filter(b * b, g) - mu_b * mu_b
    cov = _filter(a * b, g) - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


@dataclass
class MsSsimResult:
    value: float
    scales: int
    window: int
    fallback: bool  # image smaller than the 11x11 window: single-scale SSIM with a reduced window


def _as_image(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        side = int(round(np.sqrt(x.size)))
        if side * side != x.size:
            raise ValueError("flat images must have a square number of pixels")
        x = x.reshape(side, side)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("images must be square")
    return x


def ms_ssim_detail(a, b, scales: int = 5, data_range: float = 2.0) -> MsSsimResult:
    """MS-SSIM with the standard 11x11 Gaussian window and 5-scale weights.

    Only scales whose side is at least the window are used and their weights
    are renormalised.  Per-scale terms are clamped at 0 before the weighted
    geometric mean.  ``data_range`` is 2 for data in ``[-1, 1]``.
    """
    a, b = _as_image(a), _as_image(b)
    if a.shape != b.shape:
        raise ValueError("images must have equal shapes")
    side = a.shape[0]
    if side < WINDOW:
        win = side if side % 2 == 1 else side - 1
        if win < 1:
            raise ValueError("image too small")
        lum, cs = _ssim_terms(a, b, gaussian_window(win, WINDOW_SIGMA * win / WINDOW), data_range)
        return MsSsimResult(float(max(np.mean(lum * cs), 0.0)), 1, win, True)
    usable, s = 0, side
    while usable < min(scales, len(MS_SSIM_WEIGHTS)) and s >= WINDOW:
        usable += 1
        s //= 2
    weights = MS_SSIM_WEIGHTS[:usable] / MS_SSIM_WEIGHTS[:usable].sum()
    g = gaussian_window(WINDOW, WINDOW_SIGMA)
    value = 1.0
    for i, w in enumerate(weights):
        lum, cs = _ssim_terms(a, b, g, data_range)
        term = np.mean(lum * cs) if i == usable - 1 else np.mean(cs)
        value *= max(float(term), 0.0) ** w
        if i < usable - 1:
            a, b = _downsample(a), _downsample(b)
    return MsSsimResult(float(value), usable, WINDOW, False)


def ms_ssim(a, b, scales: int = 5, data_range: float = 2.0) -> float:
    return ms_ssim_detail(a, b, scales, data_range).value


def diversity_msssim(samples, n_pairs: int = 500, seed: SeedLike = 0, data_range: float = 2.0,
                     side: Optional[int] = None) -> float:
    """Mean MS-SSIM over ``n_pairs`` random pairs of distinct samples (lower means more diverse)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 2 and side is not None:
        x = x.reshape(len(x), side, side)
    if len(x) < 2:
        raise ValueError("need at least two samples")
    rng = make_rng(seed)
    i = rng.integers(0, len(x), size=n_pairs)
    j = (i + rng.integers(1, len(x), size=n_pairs)) % len(x)  # uniform over j != i
    return float(np.mean([ms_ssim(x[p], x[q], data_range=data_range) for p, q in zip(i, j)]))
