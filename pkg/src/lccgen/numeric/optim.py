from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .nn import NetworkParams
from .tensor import ShapeError

# learning rate used throughout the GAN experiments
DEFAULT_LR = 0.0002


@dataclass
class AdamState:
    learning_rate: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **hyper)


def adam_update(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
                ascend: bool = False) -> Tuple[List[np.ndarray], AdamState]:
    """One Adam step on raw arrays.  Returns new arrays and a new state."""
    params, grads = list(params), list(grads)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter, gradient and moment counts differ")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    sign = 1.0 if ascend else -1.0
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        new_p.append(p + sign * step)
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(state.learning_rate, b1, b2, state.eps, t, new_m, new_v)
    return new_p, new_state


def adam_step(net: NetworkParams, grads: Sequence[np.ndarray], state: AdamState,
              ascend: bool = False) -> Tuple[NetworkParams, AdamState]:
    """Adam descent (or ascent) on every weight and bias of ``net``."""
    arrays, state = adam_update([p.data for p in net.parameters()], grads, state, ascend=ascend)
    return net.with_parameters(arrays), state


def init_adam(net: NetworkParams, **hyper) -> AdamState:
    return AdamState.for_params([p.data for p in net.parameters()], **hyper)
