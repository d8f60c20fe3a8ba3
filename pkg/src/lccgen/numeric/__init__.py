from .nn import (
    Layer,
    NetworkParams,
    dumps_json17,
    forward,
    he_init,
    load_network,
    network_from_dict,
    network_to_dict,
    predict,
    save_network,
)
from .optim import AdamState, adam_step, adam_update, init_adam
from .rng import derive_seed, make_rng
from .tensor import ContractError, ShapeError, Tensor, backward

__all__ = [
    "AdamState",
    "ContractError",
    "Layer",
    "NetworkParams",
    "ShapeError",
    "Tensor",
    "adam_step",
    "adam_update",
    "backward",
    "derive_seed",
    "dumps_json17",
    "forward",
    "he_init",
    "init_adam",
    "load_network",
    "make_rng",
    "network_from_dict",
    "network_to_dict",
    "predict",
    "save_network",
]
