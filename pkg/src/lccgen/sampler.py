"""LCC sampling: random sparse codings supported on the d nearest anchors of a seed point."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .data import ConfigError
from .lcc import SAMPLED, Coding, Dictionary, pairwise_sq_dists, reconstruct
from .numeric.rng import SeedLike, make_rng
from .numeric.tensor import ShapeError

STANDARD_GAUSSIAN = "standard_gaussian"
NORMALIZED_GAUSSIAN = "normalized_gaussian"
PRIORS = (STANDARD_GAUSSIAN, NORMALIZED_GAUSSIAN)

# |sum z| below this is redrawn under the normalized prior
MIN_ABS_SUM = 1e-6


@dataclass(frozen=True)
class SamplerConfig:
    """``d`` nonzeros per coding, the prior on their weights, and the seed."""

    d: int = 2
    prior: str = STANDARD_GAUSSIAN
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("sampling dimension d must be >= 1")
        if self.prior not in PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}; expected one of {PRIORS}")


@dataclass
class SampledBatch:
    gammas: np.ndarray  # (n, M)
    latents: np.ndarray  # (n, d_B), V gamma
    seed_indices: np.ndarray  # pool row used as each seed point

    def __len__(self) -> int:
        return self.gammas.shape[0]

    def codings(self) -> List[Coding]:
        return [Coding(g, SAMPLED) for g in self.gammas]


def _check(dictionary: Dictionary, cfg: SamplerConfig, pool: Optional[np.ndarray]) -> np.ndarray:
    if cfg.d > dictionary.M:
        raise ConfigError(f"sampling dimension d={cfg.d} exceeds the number of anchors M={dictionary.M}")
    pool = dictionary.anchors if pool is None else np.atleast_2d(np.asarray(pool, dtype=np.float64))
    if pool.shape[0] < 1:
        raise ConfigError("the seed-point pool is empty")
    if pool.shape[1] != dictionary.latent_dim:
        raise ShapeError(f"pool points have dim {pool.shape[1]}, anchors have {dictionary.latent_dim}")
    return pool


def nearest_anchors(dictionary: Dictionary, points: np.ndarray, d: int) -> np.ndarray:
    """Indices of the ``d`` nearest anchors of each point, closest first; ties go to the lower index."""
    dist = pairwise_sq_dists(np.atleast_2d(points), dictionary.anchors)
    return np.argsort(dist, axis=1, kind="stable")[:, :d]


def _draw_weights(rng: np.random.Generator, n: int, cfg: SamplerConfig) -> np.ndarray:
    z = rng.standard_normal((n, cfg.d))
    if cfg.prior == NORMALIZED_GAUSSIAN:
        bad = np.abs(z.sum(axis=1)) < MIN_ABS_SUM
        while bad.any():
            z[bad] = rng.standard_normal((int(bad.sum()), cfg.d))
            bad = np.abs(z.sum(axis=1)) < MIN_ABS_SUM
        z = z / z.sum(axis=1, keepdims=True)
    return z


def sample_batch(dictionary: Dictionary, cfg: SamplerConfig, pool: Optional[np.ndarray] = None,
                 n: int = 64, rng: SeedLike = None) -> SampledBatch:
    """``n`` independent LCC samples and their latent points ``V gamma``.

    Seed points are drawn uniformly from ``pool`` (default: the anchors).  The
    stream comes from ``rng`` when given, else from ``cfg.seed``.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    pool = _check(dictionary, cfg, pool)
    rng = make_rng(cfg.seed if rng is None else rng)
    seeds = rng.integers(0, pool.shape[0], size=n)
    z = _draw_weights(rng, n, cfg)
    support = nearest_anchors(dictionary, pool[seeds], cfg.d)
    gammas = np.zeros((n, dictionary.M))
    np.put_along_axis(gammas, support, z, axis=1)
    return SampledBatch(gammas, reconstruct(dictionary, gammas), seeds)


def sample_coding(dictionary: Dictionary, cfg: SamplerConfig, pool: Optional[np.ndarray] = None,
                  rng: SeedLike = None, seed_index: Optional[int] = None,
                  z: Optional[np.ndarray] = None) -> Coding:
    """One LCC sample.

    ``seed_index`` and ``z`` pin the seed point and the weights (assigned to
    the neighbours in order of increasing distance); otherwise both are drawn.
    """
    if seed_index is None and z is None:
        return sample_batch(dictionary, cfg, pool, 1, rng).codings()[0]
    pool = _check(dictionary, cfg, pool)
    gen = make_rng(cfg.seed if rng is None else rng)
    if seed_index is None:
        seed_index = int(gen.integers(0, pool.shape[0]))
    if z is None:
        z = _draw_weights(gen, 1, cfg)[0]
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cfg.d,):
        raise ShapeError(f"z must have length d={cfg.d}")
    gamma = np.zeros(dictionary.M)
    gamma[nearest_anchors(dictionary, pool[seed_index], cfg.d)[0]] = z
    return Coding(gamma, SAMPLED)
