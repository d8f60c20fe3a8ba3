"""Experiment configuration as a flat ``section.key = value`` text file."""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple

from ..data import MANIFOLD_KINDS, ConfigError
from ..gan import GAUSSIAN_PRIOR, LCC_PRIOR, PHIS
from ..sampler import PRIORS

DATASET_KINDS = MANIFOLD_KINDS + ("digits8", "idx")


@dataclass
class DataSection:
    kind: str = "ring_of_gaussians"
    n: int = 2000
    n_modes: int = 8
    radius: float = 2.0
    sigma: float = 0.05
    noise: float = 0.0
    ambient_dim: Optional[int] = None
    seed: int = 0
    train_fraction: float = 0.8
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None
    downsample_to: int = 8


@dataclass
class AeSection:
    latent_dim: int = 2
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3


@dataclass
class LccSection:
    M: int = 8
    outer_iters: int = 20
    lipschitz_h: float = 1.0
    lipschitz_g: float = 1.0
    capacity_grid: Tuple[int, ...] = ()  # extra M values for the reconstruction-vs-M curve


@dataclass
class SamplerSection:
    d: int = 2
    prior: str = "standard_gaussian"
    pool: str = "anchors"


@dataclass
class GanSection:
    iterations: int = 5000
    batch_size: int = 64
    learning_rate: float = 0.0002
    beta1: float = 0.5
    hidden: int = 128
    phi: str = "log"
    prior: str = LCC_PRIOR


@dataclass
class EvalSection:
    n_samples: int = 2000
    coverage_radius: Optional[float] = None  # defaults to 3 sigma
    msssim_pairs: int = 500
    grid: int = 8  # side of the PGM sample grid (image data)


@dataclass
class GapSection:
    enabled: bool = True
    n_generated: int = 1000
    confidence: float = 0.05
    rademacher_draws: int = 10
    hidden: int = 32
    steps: int = 500
    restarts: int = 3


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    ae: AeSection = field(default_factory=AeSection)
    lcc: LccSection = field(default_factory=LccSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    gan: GanSection = field(default_factory=GanSection)
    eval: EvalSection = field(default_factory=EvalSection)
    gap: GapSection = field(default_factory=GapSection)

    def validate(self) -> "ExperimentConfig":
        d = self.data
        if d.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {d.kind!r}; expected one of {DATASET_KINDS}")
        if d.kind == "idx":
            for p in (d.idx_images, d.idx_labels):
                if p is not None and not Path(p).is_file():
                    raise ConfigError(f"referenced file does not exist: {p}")
            if d.idx_images is None:
                raise ConfigError("data.idx_images is required for kind = idx")
        if not 0.0 < d.train_fraction < 1.0:
            raise ConfigError("data.train_fraction must lie strictly between 0 and 1")
        if self.sampler.d > self.lcc.M:
            raise ConfigError(f"sampling dimension d={self.sampler.d} exceeds the number of anchors M={self.lcc.M}")
        if self.sampler.d < 1 or self.lcc.M < 2 or self.ae.latent_dim < 1:
            raise ConfigError("need d >= 1, M >= 2 and latent_dim >= 1")
        if self.sampler.prior not in PRIORS:
            raise ConfigError(f"unknown coding prior {self.sampler.prior!r}")
        if self.sampler.pool not in ("anchors", "embeddings"):
            raise ConfigError(f"unknown seed-point pool {self.sampler.pool!r}")
        if self.gan.phi not in PHIS:
            raise ConfigError(f"unknown measuring function {self.gan.phi!r}")
        if self.gan.prior not in (LCC_PRIOR, GAUSSIAN_PRIOR):
            raise ConfigError(f"unknown generator prior {self.gan.prior!r}")
        if min(self.ae.epochs, self.gan.batch_size, self.eval.n_samples) < 1 or self.gan.iterations < 0:
            raise ConfigError("epochs, batch sizes and sample counts must be positive")
        if not 0.0 < self.gap.confidence < 1.0:
            raise ConfigError("gap.confidence must lie in (0, 1)")
        return self


SECTIONS = tuple(f.name for f in fields(ExperimentConfig) if dataclasses.is_dataclass(f.default_factory))


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)


def _parse(text: str, hint, key: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if text.lower() == "none":
            return None
        hint = next(a for a in args if a is not type(None))
        origin, args = typing.get_origin(hint), typing.get_args(hint)
    try:
        if origin is tuple:
            return tuple(int(v) for v in text.replace(",", " ").split())
        if hint is bool:
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {getattr(hint, '__name__', hint)}") from None
    return text


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in SECTIONS:
            lines.append("")
            lines.extend(f"{f.name}.{g.name} = {_format(getattr(value, g.name))}" for g in fields(value))
        else:
            lines.append(f"{f.name} = {_format(value)}")
    return "\n".join(lines).strip() + "\n"


def parse(text: str) -> ExperimentConfig:
    """Missing keys keep their defaults; unknown keys are an error."""
    cfg = ExperimentConfig()
    top = _hints(ExperimentConfig)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        apply_override(cfg, key, value, top)
    return cfg


def apply_override(cfg: ExperimentConfig, key: str, value: str, top: Optional[dict] = None) -> None:
    top = top or _hints(ExperimentConfig)
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        obj = getattr(cfg, section)
        hints = _hints(type(obj))
        if name not in hints:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(obj, name, _parse(value, hints[name], key))
    else:
        if key not in top or key in SECTIONS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _parse(value, top[key], key))


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    return parse(p.read_text())


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(serialize(cfg))
