"""Discriminator classes ``F`` over which the distance and complexity suprema are taken."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from ..data import ConfigError
from ..numeric import AdamState, Tensor, adam_update, backward, forward, he_init
from ..numeric import tensor as T
from ..numeric.nn import Layer, NetworkParams

CLASS_KINDS = ("mlp", "constant", "lookup")


@dataclass(frozen=True)
class DiscClassConfig:
    """A class of functions ``R^d -> (0, 1)`` and the ascent used to search it.

    ``mlp``: sigmoid-headed MLPs with the given hidden widths.
    ``constant``: the single function ``D = constant``.
    ``lookup``: a free value ``sigmoid(theta_i)`` for every distinct input point,
    which shatters any finite sample.
    """

    kind: str = "mlp"
    hidden: Tuple[int, ...] = (32,)
    activation: str = "tanh"
    constant: float = 0.5
    steps: int = 500
    restarts: int = 3
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.kind not in CLASS_KINDS:
            raise ConfigError(f"unknown discriminator class {self.kind!r}; expected one of {CLASS_KINDS}")
        if isinstance(self.hidden, int):
            object.__setattr__(self, "hidden", (self.hidden,))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 < self.constant < 1.0:
            raise ConfigError("the constant discriminator value must lie in (0, 1)")
        if self.steps < 0 or self.restarts < 1:
            raise ConfigError("steps must be >= 0 and restarts >= 1")

    @property
    def has_parameters(self) -> bool:
        return self.kind != "constant"


class Family:
    """Parameterised discriminators evaluated on the rows of fixed point sets."""

    def __init__(self, cfg: DiscClassConfig, dim: int, points: Sequence[np.ndarray] = ()):
        self.cfg = cfg
        self.dim = dim
        self._index = {}
        if cfg.kind == "lookup":
            for block in points:
                for row in np.asarray(block, dtype=np.float64):
                    self._index.setdefault(row.tobytes(), len(self._index))
        if cfg.kind == "mlp":
            self._template = he_init([dim, *cfg.hidden, 1], seed=0, activations=cfg.activation,
                                     output_activation="sigmoid")

    def init(self, rng: np.random.Generator) -> List[np.ndarray]:
        if self.cfg.kind == "mlp":
            net = he_init(self._template.dims, seed=rng, activations=self.cfg.activation,
                          output_activation="sigmoid")
            return [p.data for p in net.parameters()]
        if self.cfg.kind == "lookup":
            return [0.1 * rng.standard_normal((len(self._index), 1))]
        return []

    def indices(self, x: np.ndarray) -> np.ndarray:
        try:
            return np.array([self._index[row.tobytes()] for row in np.asarray(x, dtype=np.float64)])
        except KeyError:
            raise ValueError("the lookup class is only defined on the points it was built with") from None

    def bind(self, x: np.ndarray) -> Callable[[List[Tensor]], Tensor]:
        """A function of the parameters giving ``D(x)`` as an (n, 1) tensor."""
        x = np.asarray(x, dtype=np.float64)
        if self.cfg.kind == "constant":
            out = Tensor(np.full((len(x), 1), self.cfg.constant))
            return lambda params: out
        if self.cfg.kind == "lookup":
            idx = self.indices(x)
            return lambda params: T.sigmoid(T.take_rows(params[0], idx))
        return lambda params: forward(self._as_net(params), x)

    def _as_net(self, params: List[Tensor]) -> NetworkParams:
        acts = self._template.activations
        return NetworkParams([Layer(params[2 * i], params[2 * i + 1], a) for i, a in enumerate(acts)])


@dataclass
class AscentResult:
    best: float
    params: List[np.ndarray]
    diverged: bool
    evaluations: int


def maximize(family: Family, objective: Callable[[List[Tensor]], Tensor], rng: np.random.Generator) -> AscentResult:
    """Best objective over ``restarts`` Adam ascents of ``steps`` steps each (every iterate counts)."""
    cfg = family.cfg
    best, best_params, diverged, evals = -np.inf, [], False, 0
    for _ in range(cfg.restarts if cfg.has_parameters else 1):
        arrays = family.init(rng)
        state = AdamState.for_params(arrays, learning_rate=cfg.learning_rate)
        for step in range(cfg.steps + 1):
            params = [Tensor(a) for a in arrays]
            value = objective(params)
            v = value.item()
            evals += 1
            if not np.isfinite(v):
                diverged = True
                break
            if v > best:
                best, best_params = v, [a.copy() for a in arrays]
            if step == cfg.steps or not arrays:
                break
            grads = backward(value, params)
            if not all(np.all(np.isfinite(g)) for g in grads):
                diverged = True
                break
            arrays, state = adam_update(arrays, grads, state, ascend=True)
    return AscentResult(float(best), best_params, diverged, evals)


ClassLike = Union[DiscClassConfig, dict, None]


def as_class_config(cfg: ClassLike) -> DiscClassConfig:
    if cfg is None:
        return DiscClassConfig()
    if isinstance(cfg, dict):
        return DiscClassConfig(**cfg)
    return cfg
