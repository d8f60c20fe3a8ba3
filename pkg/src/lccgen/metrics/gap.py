"""Generalization gap of a trained generator next to the terms of its upper bound."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..data import Dataset
from ..gan import GanModel, generate_from_input, phi_bound, phi_lipschitz, sample_generator_batch
from ..numeric import derive_seed
from ..numeric.nn import dumps_json17
from .approximation import generative_quality
from .classes import ClassLike, as_class_config
from .distance import estimate_rademacher, nn_distance_detail


def bound_value(rademacher: float, delta_phi: float, confidence: float, n: int, epsilon_dm: float) -> float:
    """``2 R + 2 Delta sqrt(2 log(1/delta) / N) + 2 eps``."""
    return 2.0 * rademacher + 2.0 * delta_phi * math.sqrt(2.0 * math.log(1.0 / confidence) / n) + 2.0 * epsilon_dm


@dataclass
class GapReport:
    train_distance: float
    heldout_distance: float
    gap: float
    rademacher_estimate: float
    delta_phi: float
    confidence: float
    epsilon_dm: float
    bound_value: float
    N: int
    phi: str = "log"
    quality_q: float = 0.0
    lipschitz_phi: float = 1.0
    n_generated: int = 0
    notes: list = field(default_factory=list)

    def identities_hold(self) -> bool:
        return (self.gap == abs(self.train_distance - self.heldout_distance)
                and self.bound_value == bound_value(self.rademacher_estimate, self.delta_phi, self.confidence,
                                                    self.N, self.epsilon_dm)
                and self.epsilon_dm == self.lipschitz_phi * self.quality_q + 2.0 * self.delta_phi)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps_json17(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "GapReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    CSV_COLUMNS = ("train_distance", "heldout_distance", "gap", "rademacher_estimate", "delta_phi", "confidence",
                   "epsilon_dm", "bound_value", "N", "phi", "quality_q", "lipschitz_phi", "n_generated")

    def csv_row(self, header: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_COLUMNS)
        d = self.to_dict()
        w.writerow([format(d[c], ".17g") if isinstance(d[c], float) else d[c] for c in self.CSV_COLUMNS])
        return buf.getvalue()

    def write(self, json_path, csv_path: Optional[str] = None) -> None:
        Path(json_path).write_text(self.to_json() + "\n")
        if csv_path is not None:
            Path(csv_path).write_text(self.csv_row(header=True))


def make_report(train_distance: float, heldout_distance: float, rademacher: float, phi: str, confidence: float,
                n: int, quality_q: float, n_generated: int = 0, notes=None) -> GapReport:
    delta = phi_bound(phi)
    l_phi = phi_lipschitz(phi)
    eps = l_phi * quality_q + 2.0 * delta
    return GapReport(train_distance, heldout_distance, abs(train_distance - heldout_distance), rademacher, delta,
                     confidence, eps, bound_value(rademacher, delta, confidence, n, eps), n, phi, quality_q, l_phi,
                     n_generated, list(notes or []))


def load_report(path) -> GapReport:
    return GapReport.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GapConfig:
    n_generated: int = 1000
    confidence: float = 0.05
    rademacher_draws: int = 10
    disc_class: ClassLike = None
    phi: Optional[str] = None  # defaults to the model's
    d: int = 2
    coding_prior: str = "standard_gaussian"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence delta must lie in (0, 1)")


def gap_harness(model: GanModel, train_ds: Dataset, heldout_ds: Dataset, cfg: Optional[GapConfig] = None) -> GapReport:
    """Distances of the generated distribution to the training and held-out sets, and the bound terms.

    Both distances use a fresh discriminator class trained from scratch with
    the same ascent seed.
    Q is evaluated on the generator's own sampled codings, where the source
    point is taken to be ``r(h)`` itself.
    """
    cfg = cfg or GapConfig()
    phi = cfg.phi or model.phi
    disc_class = as_class_config(cfg.disc_class)
    gen_input, gammas = sample_generator_batch(model, cfg.n_generated, derive_seed(cfg.seed, 1), cfg.d,
                                               cfg.coding_prior)
    fake = generate_from_input(model, gen_input)
    train = nn_distance_detail(train_ds.samples, fake, phi, disc_class, derive_seed(cfg.seed, 2))
    # the same ascent seed for both sets, so their difference reflects the data and not the restarts
    held = nn_distance_detail(heldout_ds.samples, fake, phi, disc_class, derive_seed(cfg.seed, 2))
    rad = estimate_rademacher(train_ds.samples, phi, disc_class, cfg.rademacher_draws, derive_seed(cfg.seed, 4))
    q = 0.0 if gammas is None else generative_quality(model.dictionary, gammas)
    notes = [f"sup over the class approximated by {disc_class.restarts} x {disc_class.steps} Adam ascent steps",
             "Q from sampled codings with h = r(h)"]
    if train.diverged or held.diverged:
        notes.append("an inner ascent diverged; the best finite iterate was kept")
    return make_report(train.distance, held.distance, rad, phi, cfg.confidence, len(train_ds), q,
                       cfg.n_generated, notes)
