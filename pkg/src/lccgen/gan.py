"""Adversarial training with a generator fed by LCC codings.

The generator pipeline is ``x = G_u(V gamma)``: the fixed anchor matrix ``V``
maps a coding to the latent space and only ``G_u`` is trained.  The
discriminator ends in a sigmoid so ``D(x)`` lies in ``(0, 1)``.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .autoencoder import AutoEncoder, embed
from .data import ConfigError, Dataset
from .lcc import Dictionary, reconstruct
from .numeric import (
    AdamState,
    NetworkParams,
    ShapeError,
    Tensor,
    adam_update,
    backward,
    derive_seed,
    forward,
    he_init,
    make_rng,
    predict,
)
from .numeric import tensor as T
from .numeric.nn import dumps_json17, network_from_dict, network_to_dict
from .numeric.optim import DEFAULT_LR
from .sampler import SamplerConfig, sample_batch

# -- measuring functions --------------------------------------------------------

PHI_CLAMP = 1e-7
PHIS = ("log", "identity")


def _check_phi(phi: str) -> None:
    if phi not in PHIS:
        raise ConfigError(f"unknown measuring function {phi!r}; expected one of {PHIS}")


def phi_tensor(phi: str, x: Tensor) -> Tensor:
    if phi == "log":
        return T.log(T.clip(x, PHI_CLAMP, 1.0 - PHI_CLAMP))
    return x


def phi_array(phi: str, x: np.ndarray) -> np.ndarray:
    if phi == "log":
        return np.log(np.clip(x, PHI_CLAMP, 1.0 - PHI_CLAMP))
    return np.asarray(x, dtype=np.float64)


def phi_constant(phi: str) -> float:
    """``phi_c = 2 phi(1/2)``, the two-sample objective of a constant 1/2 discriminator."""
    _check_phi(phi)
    return float(2.0 * phi_array(phi, np.array(0.5)))


def phi_bound(phi: str) -> float:
    """``Delta`` with ``|phi| <= Delta`` on the clamped range."""
    _check_phi(phi)
    return float(-np.log(PHI_CLAMP)) if phi == "log" else 1.0


def phi_lipschitz(phi: str) -> float:
    """Lipschitz constant of ``phi`` on the clamped range (``1/clamp`` for log)."""
    _check_phi(phi)
    return 1.0 / PHI_CLAMP if phi == "log" else 1.0


# -- model ----------------------------------------------------------------------

LCC_PRIOR = "lcc"
GAUSSIAN_PRIOR = "gaussian_d"


@dataclass
class GanModel:
    generator: NetworkParams  # d_B -> d
    discriminator: NetworkParams  # d -> 1, sigmoid head
    dictionary: Dictionary
    phi: str = "log"
    prior: str = LCC_PRIOR
    prior_map: Optional[NetworkParams] = None  # trainable d -> d_B map of the Gaussian baseline

    def __post_init__(self):
        _check_phi(self.phi)
        if self.prior not in (LCC_PRIOR, GAUSSIAN_PRIOR):
            raise ConfigError(f"unknown generator prior {self.prior!r}")
        if self.discriminator.out_dim != 1 or self.discriminator.activations[-1] != "sigmoid":
            raise ShapeError("the discriminator must end in a single sigmoid unit")
        if self.generator.in_dim != self.dictionary.latent_dim:
            raise ShapeError("generator input dim must equal the anchor (latent) dim")
        if self.generator.out_dim != self.discriminator.in_dim:
            raise ShapeError("generator output dim must equal the discriminator input dim")
        if (self.prior == GAUSSIAN_PRIOR) != (self.prior_map is not None):
            raise ConfigError("a prior map is required for, and only for, the gaussian_d prior")
        if self.prior_map is not None and self.prior_map.out_dim != self.generator.in_dim:
            raise ShapeError("prior map must output the generator input dim")

    @property
    def data_dim(self) -> int:
        return self.generator.out_dim

    def generator_params(self) -> List[Tensor]:
        head = [] if self.prior_map is None else self.prior_map.parameters()
        return head + self.generator.parameters()

    def with_generator_params(self, arrays: Sequence[np.ndarray]) -> "GanModel":
        arrays = list(arrays)
        prior_map = None
        if self.prior_map is not None:
            k = len(self.prior_map.parameters())
            prior_map, arrays = self.prior_map.with_parameters(arrays[:k]), arrays[k:]
        return GanModel(self.generator.with_parameters(arrays), self.discriminator, self.dictionary,
                        self.phi, self.prior, prior_map)

    def with_discriminator(self, disc: NetworkParams) -> "GanModel":
        return GanModel(self.generator, disc, self.dictionary, self.phi, self.prior, self.prior_map)


def init_gan_model(dictionary: Dictionary, data_dim: int, seed: int, phi: str = "log",
                   prior: str = LCC_PRIOR, noise_dim: Optional[int] = None, hidden: int = 128) -> GanModel:
    """He-initialised generator ``d_B -> h -> h -> d`` and discriminator ``d -> h -> h -> 1``."""
    d_b = dictionary.latent_dim
    gen = he_init([d_b, hidden, hidden, data_dim], seed=derive_seed(seed, 1), activations="tanh")
    disc = he_init([data_dim, hidden, hidden, 1], seed=derive_seed(seed, 2), activations="tanh",
                   output_activation="sigmoid")
    prior_map = None
    if prior == GAUSSIAN_PRIOR:
        if not noise_dim:
            raise ConfigError("the gaussian_d prior needs the noise dimension d")
        prior_map = he_init([noise_dim, d_b], seed=derive_seed(seed, 3), activations="identity")
    return GanModel(gen, disc, dictionary, phi, prior, prior_map)


def _gen_forward(model: GanModel, gen_input: np.ndarray) -> Tensor:
    """Tape-recorded generator output for latent (LCC) or noise (baseline) input."""
    x = Tensor(gen_input)
    if model.prior_map is not None:
        x = forward(model.prior_map, x)
    return forward(model.generator, x)


def generate_from_input(model: GanModel, gen_input: np.ndarray) -> np.ndarray:
    h = np.asarray(gen_input, dtype=np.float64)
    if model.prior_map is not None:
        h = predict(model.prior_map, h)
    return predict(model.generator, h)


def generate(model: GanModel, codings) -> np.ndarray:
    """Samples ``G_u(V gamma)`` for a batch of codings (an N x M array or a list of ``Coding``)."""
    if isinstance(codings, (list, tuple)):
        codings = np.stack([c.gamma for c in codings])
    gammas = np.atleast_2d(np.asarray(codings, dtype=np.float64))
    if gammas.shape[1] != model.dictionary.M:
        raise ShapeError(f"coding length {gammas.shape[1]} does not match M={model.dictionary.M}")
    return predict(model.generator, reconstruct(model.dictionary, gammas))


# -- one step each --------------------------------------------------------------

def _disc_objective_tensor(model: GanModel, disc: NetworkParams, real: np.ndarray, fake: np.ndarray) -> Tensor:
    d_real = forward(disc, real)
    d_fake = forward(disc, fake)
    return T.mean(phi_tensor(model.phi, d_real)) + T.mean(phi_tensor(model.phi, 1.0 - d_fake))


def disc_objective(model: GanModel, real: np.ndarray, gen_input: np.ndarray) -> float:
    """``(1/n) sum phi(D(x_i)) + phi(1 - D(G(input_i)))``."""
    fake = generate_from_input(model, gen_input)
    d_real, d_fake = predict(model.discriminator, real), predict(model.discriminator, fake)
    return float(np.mean(phi_array(model.phi, d_real)) + np.mean(phi_array(model.phi, 1.0 - d_fake)))


def gen_objective(model: GanModel, gen_input: np.ndarray) -> float:
    """``(1/n) sum phi(1 - D(G(input_i)))``."""
    d_fake = predict(model.discriminator, generate_from_input(model, gen_input))
    return float(np.mean(phi_array(model.phi, 1.0 - d_fake)))


def disc_gradients(model: GanModel, real: np.ndarray, gen_input: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    if real.shape[0] != gen_input.shape[0]:
        raise ShapeError("real and generated batches must have the same size")
    fake = generate_from_input(model, gen_input)
    obj = _disc_objective_tensor(model, model.discriminator, real, fake)
    return obj.item(), backward(obj, model.discriminator.parameters())


def gen_gradients(model: GanModel, gen_input: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    d_fake = forward(model.discriminator, _gen_forward(model, gen_input))
    obj = T.mean(phi_tensor(model.phi, 1.0 - d_fake))
    return obj.item(), backward(obj, model.generator_params())


def _norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def disc_step(model: GanModel, real: np.ndarray, gen_input: np.ndarray,
              state: AdamState) -> Tuple[GanModel, AdamState, float, float]:
    """One Adam ascent step on the discriminator objective; the generator is untouched.

    Returns ``(model, state, objective before the step, gradient norm)``.
    """
    obj, grads = disc_gradients(model, real, gen_input)
    arrays, state = adam_update([p.data for p in model.discriminator.parameters()], grads, state, ascend=True)
    return model.with_discriminator(model.discriminator.with_parameters(arrays)), state, obj, _norm(grads)


def gen_step(model: GanModel, gen_input: np.ndarray,
             state: AdamState) -> Tuple[GanModel, AdamState, float, float]:
    """One Adam descent step on the generator objective; the discriminator is untouched."""
    obj, grads = gen_gradients(model, gen_input)
    arrays, state = adam_update([p.data for p in model.generator_params()], grads, state)
    return model.with_generator_params(arrays), state, obj, _norm(grads)


# -- training loop --------------------------------------------------------------

@dataclass
class GanConfig:
    iterations: int = 5000
    batch_size: int = 64
    learning_rate: float = DEFAULT_LR
    beta1: float = 0.9
    hidden: int = 128
    phi: str = "log"
    prior: str = LCC_PRIOR
    d: int = 2
    coding_prior: str = "standard_gaussian"
    pool: str = "anchors"  # or "embeddings"
    seed: int = 0

    def __post_init__(self):
        _check_phi(self.phi)
        if self.prior not in (LCC_PRIOR, GAUSSIAN_PRIOR):
            raise ConfigError(f"unknown generator prior {self.prior!r}")
        if self.pool not in ("anchors", "embeddings"):
            raise ConfigError(f"unknown seed-point pool {self.pool!r}")
        if self.iterations < 0 or self.batch_size < 1:
            raise ConfigError("iterations must be >= 0 and batch_size >= 1")

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(d=self.d, prior=self.coding_prior, seed=self.seed)


@dataclass
class TrainLog:
    """One record per iteration.  ``wall_clock`` is the only field that is not reproducible."""

    records: List[dict] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def append(self, **rec) -> None:
        if self.records and rec["iteration"] <= self.records[-1]["iteration"]:
            raise ValueError("iteration index must increase")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def deterministic_records(self) -> List[dict]:
        return [{k: v for k, v in r.items() if k != "wall_clock"} for r in self.records]

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records])

    def write_jsonl(self, path, include_wall_clock: bool = True) -> None:
        rows = self.records if include_wall_clock else self.deterministic_records()
        with open(path, "w") as fh:
            fh.write(dumps_json17({"seeds": self.seeds, "config": self.config}) + "\n")
            for r in rows:
                fh.write(dumps_json17(r) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TrainLog":
        lines = Path(path).read_text().splitlines()
        head = json.loads(lines[0])
        return cls([json.loads(line) for line in lines[1:]], head["seeds"], head["config"])


class TrainingDiverged(RuntimeError):
    """A loss became NaN/Inf; ``snapshot`` holds the offending batch and the last good model."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


def _input_drawer(model: GanModel, cfg: GanConfig, pool: Optional[np.ndarray], rng: np.random.Generator):
    if model.prior == GAUSSIAN_PRIOR:
        return lambda: rng.standard_normal((cfg.batch_size, cfg.d))
    sampler = cfg.sampler()
    return lambda: sample_batch(model.dictionary, sampler, pool, cfg.batch_size, rng).latents


def gan_train(ds: Dataset, ae: Optional[AutoEncoder], dictionary: Dictionary, cfg: GanConfig,
              on_batch: Optional[Callable[[str, int, np.ndarray], None]] = None) -> Tuple[GanModel, TrainLog]:
    """Alternate one discriminator ascent and one generator descent step per iteration.

    A fresh LCC minibatch is drawn before each of the two steps.  Data are
    expected in ``[-1, 1]`` (the generator head is tanh).  ``on_batch`` is
    called as ``on_batch(stage, iteration, generator_input)`` for inspection.
    """
    if cfg.d > dictionary.M and cfg.prior == LCC_PRIOR:
        raise ConfigError(f"sampling dimension d={cfg.d} exceeds M={dictionary.M}")
    model = init_gan_model(dictionary, ds.dim, cfg.seed, cfg.phi, cfg.prior, cfg.d, cfg.hidden)
    pool = None
    if cfg.pool == "embeddings":
        if ae is None:
            raise ConfigError("pool=embeddings needs the trained autoencoder")
        pool = embed(ae, ds)
    data_rng = make_rng(derive_seed(cfg.seed, 10))
    draw = _input_drawer(model, cfg, pool, make_rng(derive_seed(cfg.seed, 11)))
    d_state = AdamState.for_params([p.data for p in model.discriminator.parameters()],
                                   learning_rate=cfg.learning_rate, beta1=cfg.beta1)
    g_state = AdamState.for_params([p.data for p in model.generator_params()], learning_rate=cfg.learning_rate,
                                   beta1=cfg.beta1)
    log = TrainLog(seeds={"seed": cfg.seed, "data": derive_seed(cfg.seed, 10), "codings": derive_seed(cfg.seed, 11)},
                   config=asdict(cfg))
    for it in range(cfg.iterations):
        start = time.perf_counter()
        real = ds.samples[data_rng.integers(0, len(ds), size=cfg.batch_size)]
        d_input = draw()
        if on_batch:
            on_batch("disc", it, d_input)
        prev = model
        snapshot = {"iteration": it, "real_batch": real, "disc_input": d_input, "gen_input": None,
                    "d_objective": None, "g_objective": None, "model": prev}
        if not (np.all(np.isfinite(real)) and np.all(np.isfinite(d_input))):
            raise TrainingDiverged(f"non-finite discriminator batch at iteration {it}", snapshot)
        model, d_state, d_obj, d_norm = disc_step(model, real, d_input, d_state)
        snapshot["d_objective"] = d_obj
        if not (np.isfinite(d_obj) and np.isfinite(d_norm)):
            raise TrainingDiverged(f"non-finite discriminator loss at iteration {it}", snapshot)
        g_input = draw()
        if on_batch:
            on_batch("gen", it, g_input)
        snapshot["gen_input"] = g_input
        if not np.all(np.isfinite(g_input)):
            raise TrainingDiverged(f"non-finite generator batch at iteration {it}", snapshot)
        model, g_state, g_obj, g_norm = gen_step(model, g_input, g_state)
        snapshot["g_objective"] = g_obj
        if not (np.isfinite(g_obj) and np.isfinite(g_norm)):
            raise TrainingDiverged(f"non-finite generator loss at iteration {it}", snapshot)
        log.append(iteration=it, d_objective=d_obj, g_objective=g_obj, d_grad_norm=d_norm,
                   g_grad_norm=g_norm, wall_clock=time.perf_counter() - start)
    return model, log


def sample_generator_batch(model: GanModel, n: int, seed: int, d: int, coding_prior: str = "standard_gaussian",
                           pool: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Evaluation-time generator inputs drawn the way training drew them, plus the codings (LCC only)."""
    rng = make_rng(seed)
    if model.prior == GAUSSIAN_PRIOR:
        return rng.standard_normal((n, d)), None
    batch = sample_batch(model.dictionary, SamplerConfig(d=d, prior=coding_prior, seed=seed), pool, n, rng)
    return batch.latents, batch.gammas


def sample_generator_inputs(model: GanModel, n: int, seed: int, d: int, coding_prior: str = "standard_gaussian",
                            pool: Optional[np.ndarray] = None) -> np.ndarray:
    return sample_generator_batch(model, n, seed, d, coding_prior, pool)[0]


# -- checkpoints ----------------------------------------------------------------

def gan_to_dict(model: GanModel) -> dict:
    return {"generator": network_to_dict(model.generator), "discriminator": network_to_dict(model.discriminator),
            "dictionary": model.dictionary.to_dict(), "phi": model.phi, "prior": model.prior,
            "prior_map": None if model.prior_map is None else network_to_dict(model.prior_map)}


def gan_from_dict(d: dict) -> GanModel:
    pm = d.get("prior_map")
    return GanModel(network_from_dict(d["generator"]), network_from_dict(d["discriminator"]),
                    Dictionary.from_dict(d["dictionary"]), d["phi"], d["prior"],
                    None if pm is None else network_from_dict(pm))


def save_gan(model: GanModel, path) -> None:
    Path(path).write_text(dumps_json17(gan_to_dict(model)) + "\n")


def load_gan(path) -> GanModel:
    return gan_from_dict(json.loads(Path(path).read_text()))
