"""Autoencoder that learns the latent manifold the codings live on."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .data import Dataset
from .numeric import NetworkParams, ShapeError, adam_step, backward, forward, he_init, init_adam, predict
from .numeric.nn import dumps_json17, network_from_dict, network_to_dict
from .numeric.rng import derive_seed, make_rng
from .numeric import tensor as T


@dataclass
class AutoEncoder:
    encoder: NetworkParams
    decoder: NetworkParams
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise ShapeError("encoder output and decoder input must both equal the latent dim")

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        return predict(self.decoder, predict(self.encoder, x))

    def reconstruction_mse(self, ds: Dataset) -> float:
        return float(np.mean((self.reconstruct(ds.samples) - ds.samples) ** 2))


def build_autoencoder(data_dim: int, latent_dim: int, seed: int,
                      hidden: Sequence[int] = (64, 64)) -> AutoEncoder:
    enc = he_init([data_dim, *hidden, latent_dim], seed=derive_seed(seed, 1), activations="tanh")
    dec = he_init([latent_dim, *reversed(hidden), data_dim], seed=derive_seed(seed, 2),
                  activations="tanh", output_activation="identity")
    return AutoEncoder(enc, dec)


def train_ae(ds: Dataset, latent_dim: int, epochs: int, seed: int, batch_size: int = 64,
             learning_rate: float = 1e-3, hidden: Sequence[int] = (64, 64)) -> Tuple[AutoEncoder, List[float]]:
    """Fit encoder/decoder to minimise mean squared reconstruction error.

    Returns the autoencoder and the mean minibatch loss of every epoch.
    """
    if latent_dim < 1 or epochs < 1:
        raise ValueError("latent_dim and epochs must be >= 1")
    ae = build_autoencoder(ds.dim, latent_dim, seed, hidden)
    if latent_dim > ds.dim:
        msg = f"latent_dim {latent_dim} exceeds data dim {ds.dim}: the autoencoder expands rather than compresses"
        ae.notes.append(msg)
        warnings.warn(msg, stacklevel=2)
    rng = make_rng(derive_seed(seed, 3))
    # encoder and decoder layers chain through the latent dim, so train them as one network
    net = NetworkParams(ae.encoder.layers + ae.decoder.layers)
    n_enc = len(ae.encoder.layers)
    state = init_adam(net, learning_rate=learning_rate)
    x_all = ds.samples
    losses = []
    for _ in range(epochs):
        order = rng.permutation(len(ds))
        total = 0.0
        for start in range(0, len(order), batch_size):
            xb = x_all[order[start:start + batch_size]]
            loss = T.mean(T.square(forward(net, xb) - xb))
            net, state = adam_step(net, backward(loss, net.parameters()), state)
            total += loss.item() * len(xb)
        losses.append(total / len(order))
    enc, dec = NetworkParams(net.layers[:n_enc]), NetworkParams(net.layers[n_enc:])
    return AutoEncoder(enc, dec, ae.notes), losses


def embed(ae: AutoEncoder, ds) -> np.ndarray:
    """Latent points ``h_i = Encoder(x_i)``, one row per sample."""
    x = ds.samples if isinstance(ds, Dataset) else np.asarray(ds, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != ae.encoder.in_dim:
        raise ShapeError(f"data dim {x.shape} does not match encoder in_dim {ae.encoder.in_dim}")
    return predict(ae.encoder, x)


def save_autoencoder(ae: AutoEncoder, path) -> None:
    doc = {"encoder": network_to_dict(ae.encoder), "decoder": network_to_dict(ae.decoder), "notes": ae.notes}
    Path(path).write_text(dumps_json17(doc) + "\n")


def load_autoencoder(path) -> AutoEncoder:
    doc = json.loads(Path(path).read_text())
    return AutoEncoder(network_from_dict(doc["encoder"]), network_from_dict(doc["decoder"]),
                       list(doc.get("notes", [])))
