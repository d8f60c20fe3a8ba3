"""Sampled first- and second-order Lipschitz constants of networks and tensor functions."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from ..lcc import Dictionary, reconstruct
from ..numeric import NetworkParams, Tensor, backward, forward, make_rng, predict
from ..numeric import tensor as T
from ..numeric.rng import SeedLike

Function = Union[NetworkParams, Callable[[Tensor], Tensor]]
PairSampler = Callable[[np.random.Generator, int], Tuple[np.ndarray, np.ndarray]]

DEFAULT_SAFETY = 1.5


def _apply(f: Function, x: Tensor) -> Tensor:
    return forward(f, x) if isinstance(f, NetworkParams) else f(x)


def values_and_jvp(f: Function, x: np.ndarray, direction: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``f(x)`` and ``J_f(x) direction`` row by row; one reverse pass per output unit."""
    x = np.asarray(x, dtype=np.float64)
    xt = Tensor(x)
    out = _apply(f, xt)
    y = out.data.reshape(len(x), -1)
    jvp = np.empty_like(y)
    for k in range(y.shape[1]):
        mask = np.zeros(out.shape)
        mask.reshape(len(x), -1)[:, k] = 1.0
        # rows are independent, so d/dx of sum_i f_k(x_i) stacks the per-row gradients
        (g,) = backward(T.tensor_sum(T.mul(out, mask)), [xt])
        jvp[:, k] = np.sum(g * direction, axis=1)
    return y, jvp


@dataclass
class LipschitzConstants:
    first: float
    second: float
    n_pairs: int
    n_skipped: int
    safety: float
    method: str = "max ratio over sampled pairs x safety; Jacobian by reverse-mode autodiff"


def estimate_lipschitz(f: Function, domain_sampler: PairSampler, n_pairs: int = 1000,
                       safety: float = DEFAULT_SAFETY, seed: SeedLike = 0) -> LipschitzConstants:
    """``safety * max ||f(x') - f(x)|| / ||x' - x||`` and the second-order analogue.

    The second-order ratio is ``||f(x') - f(x) - J_f(x)(x' - x)|| / ||x' - x||^2``.
    Coincident pairs are skipped.
    """
    if n_pairs < 100:
        raise ValueError("n_pairs must be >= 100")
    x, x2 = domain_sampler(make_rng(seed), n_pairs)
    x, x2 = np.atleast_2d(x), np.atleast_2d(x2)
    diff = x2 - x
    dist = np.linalg.norm(diff, axis=1)
    keep = dist > 0
    x, x2, diff, dist = x[keep], x2[keep], diff[keep], dist[keep]
    if len(x) == 0:
        return LipschitzConstants(0.0, 0.0, 0, int(n_pairs), safety)
    fx, jvp = values_and_jvp(f, x, diff)
    fx2, _ = values_and_jvp(f, x2, np.zeros_like(diff))
    delta = np.linalg.norm(fx2 - fx, axis=1)
    resid = np.linalg.norm(fx2 - fx - jvp, axis=1)
    return LipschitzConstants(float(safety * np.max(delta / dist)), float(safety * np.max(resid / dist ** 2)),
                              int(len(x)), int(np.sum(~keep)), safety)


def box_sampler(lo, hi, dim: int) -> PairSampler:
    """Independent uniform pairs in the box ``[lo, hi]^dim``."""
    def sample(rng, n):
        return rng.uniform(lo, hi, size=(n, dim)), rng.uniform(lo, hi, size=(n, dim))
    return sample


def pair_sampler(a: np.ndarray, b: np.ndarray) -> PairSampler:
    """Pairs ``(a_i, b_i)`` drawn (with replacement) from matched rows."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)

    def sample(rng, n):
        idx = rng.integers(0, len(a), size=n)
        return a[idx], b[idx]
    return sample


def mixture_sampler(*samplers: PairSampler) -> PairSampler:
    """Split the pair budget evenly across ``samplers``."""
    def sample(rng, n):
        sizes = [n // len(samplers) + (1 if i < n % len(samplers) else 0) for i in range(len(samplers))]
        parts = [s(rng, k) for s, k in zip(samplers, sizes) if k > 0]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return sample


@dataclass
class LipschitzEstimate:
    """Constants entering the approximation inequalities: discriminator ``L_x``, generator ``L_h`` and ``L_G``."""

    L_x: float
    L_h: float
    L_G: float
    n_pairs: int
    safety: float
    method: str

    def __post_init__(self):
        if min(self.L_x, self.L_h, self.L_G) <= 0:
            raise ValueError("Lipschitz constants must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _coding_pairs(dictionary: Dictionary, H: Optional[np.ndarray], gammas: np.ndarray):
    r = reconstruct(dictionary, gammas)
    rows, cols = np.nonzero(gammas)
    anchor_pairs = (r[rows], dictionary.anchors[cols])  # base point r(h), expansion towards v
    point_pairs = (H, r) if H is not None else (r, r)
    return r, anchor_pairs, point_pairs


def estimate_gan_lipschitz(generator: NetworkParams, discriminator: Optional[NetworkParams], dictionary: Dictionary,
                           gammas: np.ndarray, H: Optional[np.ndarray] = None, n_pairs: int = 2000,
                           safety: float = DEFAULT_SAFETY, seed: SeedLike = 0, floor: float = 1e-12) -> LipschitzEstimate:
    """Constants sampled on the domain the approximation inequalities touch.

    Generator pairs: ``(r(h), v_j)`` for support anchors, ``(h, r(h))`` and
    uniform pairs in the bounding box of anchors and points.  Discriminator
    pairs: ``(G(h), sum_j gamma_j G(v_j))`` plus the box of generator outputs.
    Constants are floored at ``floor`` so an exactly flat function still has a
    positive constant.
    """
    gammas = np.atleast_2d(gammas)
    r, anchor_pairs, point_pairs = _coding_pairs(dictionary, H, gammas)
    pts = np.vstack([r, dictionary.anchors] + ([H] if H is not None else []))
    box = box_sampler(pts.min(axis=0), pts.max(axis=0), pts.shape[1])
    sampler = mixture_sampler(pair_sampler(*anchor_pairs), pair_sampler(*point_pairs), box)
    gen = estimate_lipschitz(generator, sampler, n_pairs, safety, seed)
    l_x = floor
    if discriminator is not None:
        g_h = predict(generator, H if H is not None else r)
        mix = gammas @ predict(generator, dictionary.anchors)
        outs = np.vstack([g_h, mix])
        d_box = box_sampler(outs.min(axis=0), outs.max(axis=0), outs.shape[1])
        disc = estimate_lipschitz(discriminator, mixture_sampler(pair_sampler(g_h, mix), d_box), n_pairs, safety,
                                  seed + 1 if isinstance(seed, int) else seed)
        l_x = max(disc.first, floor)
    return LipschitzEstimate(l_x, max(gen.first, floor), max(gen.second, floor), n_pairs, safety,
                             "sampled max ratio x safety on coding-induced pairs; Jacobians by autodiff")
