"""Layered affine + activation networks on top of :mod:`lccgen.numeric.tensor`."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from .rng import SeedLike, make_rng
from .tensor import ACTIVATIONS, ShapeError, Tensor, add, matmul, stable_sigmoid

ACTIVATION_TAGS = tuple(ACTIVATIONS)


@dataclass
class Layer:
    weight: Tensor  # (in, out)
    bias: Tensor  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.data.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"layer weight {self.weight.shape} and bias {self.bias.shape} disagree")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class NetworkParams:
    """An MLP: ``layers[i]`` maps ``in_i -> out_i`` and ``out_i == in_{i+1}``."""

    layers: List[Layer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def dims(self) -> List[int]:
        return [self.in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def activations(self) -> List[str]:
        return [layer.activation for layer in self.layers]

    def parameters(self) -> List[Tensor]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def with_parameters(self, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        """Same architecture, new leaf tensors holding ``arrays``."""
        arrays = list(arrays)
        if len(arrays) != 2 * len(self.layers):
            raise ShapeError("parameter count does not match the architecture")
        layers = []
        for i, layer in enumerate(self.layers):
            w, b = arrays[2 * i], arrays[2 * i + 1]
            layers.append(Layer(Tensor(w), Tensor(b), layer.activation))
        return NetworkParams(layers)

    def copy(self) -> "NetworkParams":
        return self.with_parameters([p.data.copy() for p in self.parameters()])

    def __call__(self, x) -> Tensor:
        return forward(self, x)


def forward(net: NetworkParams, x: Union[Tensor, np.ndarray]) -> Tensor:
    """Apply ``net`` to a batch ``x`` of shape (batch, in_dim)."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.data.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match network in_dim {net.in_dim}")
    h = x
    for layer in net.layers:
        h = ACTIVATIONS[layer.activation](add(matmul(h, layer.weight), layer.bias))
    return h


def predict(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Forward pass on plain arrays without building a tape."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {h.shape} does not match network in_dim {net.in_dim}")
    for layer in net.layers:
        z = h @ layer.weight.data + layer.bias.data
        act = layer.activation
        if act == "tanh":
            h = np.tanh(z)
        elif act == "relu":
            h = np.maximum(z, 0.0)
        elif act == "sigmoid":
            h = stable_sigmoid(z)
        else:
            h = z
    return h


def he_init(dims: Sequence[int], seed: SeedLike, activations: Union[str, Sequence[str]] = "tanh",
            output_activation: str | None = None) -> NetworkParams:
    """He-normal weights ``N(0, 2/fan_in)`` and zero biases.

    ``activations`` is either one tag for every hidden layer or a full list;
    ``output_activation`` overrides the tag of the final layer.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must list at least two positive extents, got {dims}")
    n_layers = len(dims) - 1
    if isinstance(activations, str):
        acts = [activations] * n_layers
    else:
        acts = list(activations)
        if len(acts) != n_layers:
            raise ValueError("one activation per layer is required")
    if output_activation is not None:
        acts[-1] = output_activation
    rng = make_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], acts):
        w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append(Layer(Tensor(w), Tensor(np.zeros(fan_out)), act))
    return NetworkParams(layers)


# -- checkpoints --------------------------------------------------------------

def dumps_json17(obj, indent: int | None = None) -> str:
    """JSON text where every float carries 17 significant digits."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        if isinstance(o, dict):
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{" + ",".join(items) + (end if items else "") + "}"
        if isinstance(o, (list, tuple)):
            if all(isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(_num(v) for v in o) + "]"
            items = [pad + enc(v, level + 1) for v in o]
            return "[" + ",".join(items) + (end if items else "") + "]"
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, (bool, np.bool_)) or o is None or isinstance(o, str):
            return json.dumps(o if not isinstance(o, np.bool_) else bool(o))
        if isinstance(o, (float, int, np.floating, np.integer)):
            return _num(o)
        raise TypeError(f"cannot encode {type(o).__name__}")

    return enc(obj, 0)


def _num(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if not np.isfinite(v):
        raise ValueError("non-finite value in checkpoint")
    return format(v, ".17g")


def network_to_dict(net: NetworkParams) -> dict:
    return {
        "dims": net.dims,
        "activations": net.activations,
        "layers": [
            {"weight": layer.weight.data.tolist(), "bias": layer.bias.data.tolist()}
            for layer in net.layers
        ],
    }


def network_from_dict(d: dict) -> NetworkParams:
    dims, acts = d["dims"], d["activations"]
    layers = []
    for i, (spec, act) in enumerate(zip(d["layers"], acts)):
        w = np.asarray(spec["weight"], dtype=np.float64).reshape(dims[i], dims[i + 1])
        b = np.asarray(spec["bias"], dtype=np.float64).reshape(dims[i + 1])
        layers.append(Layer(Tensor(w), Tensor(b), act))
    return NetworkParams(layers)


def save_network(net: NetworkParams, path) -> None:
    Path(path).write_text(dumps_json17(network_to_dict(net)) + "\n")


def load_network(path) -> NetworkParams:
    return network_from_dict(json.loads(Path(path).read_text()))
