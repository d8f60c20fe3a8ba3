"""The experiment stages and the artifacts each one reads and writes.

Every stage takes the config and an output directory, reads its upstream
checkpoints from that directory and writes its own.  A missing upstream file
is a :class:`StageOrderError` naming that file.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import lcc
from ..autoencoder import embed, load_autoencoder, save_autoencoder, train_ae
from ..data import Dataset, ManifoldSpec, digits_8x8, generate, load_idx, normalize, split, write_csv
from ..gan import GanConfig, TrainLog, gan_train, generate_from_input, load_gan, sample_generator_batch, save_gan
from ..metrics import DiscClassConfig, GapConfig, diversity_msssim, gap_harness, mode_coverage
from ..numeric import derive_seed
from ..numeric.nn import dumps_json17
from .config import ExperimentConfig, save_config

STAGES = ("train-ae", "learn-lcc", "train-gan", "eval", "gap")

# child-seed tags, one per stage
_AE, _LCC, _GAN, _EVAL, _GAP, _SAMPLE = 1, 2, 3, 4, 5, 6

AE_FILE = "ae.json"
DICT_FILE = "dictionary.json"
GAN_FILE = "gan.json"
METRICS_FILE = "metrics.json"
GAP_FILE = "gap.json"
MANIFEST_FILE = "MANIFEST"


class StageOrderError(RuntimeError):
    """An upstream artifact a stage depends on has not been produced."""


# -- data -----------------------------------------------------------------------

def manifold_spec(cfg: ExperimentConfig) -> Optional[ManifoldSpec]:
    d = cfg.data
    if d.kind in ("digits8", "idx"):
        return None
    return ManifoldSpec(d.kind, n_modes=d.n_modes, radius=d.radius, sigma=d.sigma, noise=d.noise,
                        ambient_dim=d.ambient_dim, seed=d.seed)


def load_data(cfg: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    """Train and held-out splits, both scaled to ``[-1, 1]``."""
    d = cfg.data
    if d.kind == "digits8":
        ds = digits_8x8()
    elif d.kind == "idx":
        ds = load_idx(d.idx_images, d.idx_labels, d.downsample_to)
    else:
        ds = normalize(generate(manifold_spec(cfg), d.n))
    return split(ds, d.train_fraction, derive_seed(d.seed, 1))


def image_side(ds: Dataset) -> Optional[int]:
    return ds.meta.get("side")


# -- files ----------------------------------------------------------------------

def _require(out: Path, name: str, stage: str) -> Path:
    p = out / name
    if not p.is_file():
        raise StageOrderError(f"stage order: {stage} needs {p}, which an earlier stage has not written")
    return p


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, completed: List[str], failed: Optional[str] = None, error: str = "") -> Path:
    """Every artifact under ``out`` with its SHA-256, plus the stage status."""
    lines = [f"# completed: {' '.join(completed) if completed else '-'}"]
    if failed:
        lines.append(f"# failed stage: {failed}")
        lines.append(f"# error: {error.splitlines()[0] if error else ''}")
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != MANIFEST_FILE:
            lines.append(f"{sha256(p)}  {p.relative_to(out).as_posix()}")
    path = out / MANIFEST_FILE
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, doc: dict) -> None:
    path.write_text(dumps_json17(doc, indent=2) + "\n")


def write_pgm_grid(images: np.ndarray, side: int, path: Path, grid: int) -> None:
    """Binary PGM mosaic of up to ``grid x grid`` images with a one-pixel border; ``[-1, 1]`` maps to 0..255."""
    images = np.asarray(images, dtype=np.float64)[: grid * grid].reshape(-1, side, side)
    cell = side + 1
    canvas = np.zeros((grid * cell + 1, grid * cell + 1))
    for k, img in enumerate(images):
        r, c = divmod(k, grid)
        canvas[1 + r * cell: 1 + r * cell + side, 1 + c * cell: 1 + c * cell + side] = (img + 1.0) / 2.0
    pix = np.clip(np.round(canvas * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + pix.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


# -- stages ---------------------------------------------------------------------

def stage_train_ae(cfg: ExperimentConfig, out: Path) -> dict:
    train, _ = load_data(cfg)
    ae, losses = train_ae(train, cfg.ae.latent_dim, cfg.ae.epochs, derive_seed(cfg.seed, _AE),
                          cfg.ae.batch_size, cfg.ae.learning_rate)
    save_autoencoder(ae, out / AE_FILE)
    write_csv(np.column_stack([np.arange(1, len(losses) + 1), losses]), out / "ae_losses.csv", ["epoch", "mse"])
    return {"ae_final_loss": losses[-1], "ae_reconstruction_mse": ae.reconstruction_mse(train)}


def stage_learn_lcc(cfg: ExperimentConfig, out: Path) -> dict:
    ae = load_autoencoder(_require(out, AE_FILE, "learn-lcc"))
    train, _ = load_data(cfg)
    H = embed(ae, train)
    c = cfg.lcc
    seed = derive_seed(cfg.seed, _LCC)
    fit = lcc.learn_dictionary(H, c.M, c.lipschitz_h, c.lipschitz_g, c.outer_iters, seed)
    lcc.save_dictionary(fit.dictionary, out / DICT_FILE)
    lcc.write_codings_csv(fit.gammas, out / "codings.csv")
    trace = np.column_stack([np.arange(1, len(fit.trace) + 1), fit.trace, fit.unsquared_trace])
    write_csv(trace, out / "lcc_trace.csv", ["outer_iteration", "objective", "objective_unsquared"])
    err = lcc.mean_reconstruction_error(fit.dictionary, H, fit.gammas)
    rows = [(c.M, err)]
    for m in c.capacity_grid:
        if m != c.M:
            f = lcc.learn_dictionary(H, m, c.lipschitz_h, c.lipschitz_g, c.outer_iters, seed)
            rows.append((m, lcc.mean_reconstruction_error(f.dictionary, H, f.gammas)))
    write_csv(np.array(sorted(rows)), out / "reconstruction_vs_M.csv", ["M", "mean_reconstruction_error"])
    return {"lcc_mean_reconstruction_error": err, "lcc_final_objective": fit.trace[-1] if fit.trace else None,
            "lcc_unconverged_codings": int(np.sum(~fit.converged)), "lcc_events": fit.events}


def gan_config(cfg: ExperimentConfig) -> GanConfig:
    g = cfg.gan
    return GanConfig(iterations=g.iterations, batch_size=g.batch_size, learning_rate=g.learning_rate,
                     beta1=g.beta1, hidden=g.hidden, phi=g.phi, prior=g.prior, d=cfg.sampler.d,
                     coding_prior=cfg.sampler.prior, pool=cfg.sampler.pool, seed=derive_seed(cfg.seed, _GAN))


def stage_train_gan(cfg: ExperimentConfig, out: Path) -> dict:
    ae = load_autoencoder(_require(out, AE_FILE, "train-gan"))
    dictionary = lcc.load_dictionary(_require(out, DICT_FILE, "train-gan"))
    train, _ = load_data(cfg)
    model, log = gan_train(train, ae, dictionary, gan_config(cfg))
    save_gan(model, out / GAN_FILE)
    log.write_jsonl(out / "trainlog.jsonl")
    cols = ["iteration", "d_objective", "g_objective", "d_grad_norm", "g_grad_norm"]
    if len(log):
        write_csv(np.column_stack([log.column(k) for k in cols]), out / "loss_curves.csv", cols)
    last = log.deterministic_records()[-1] if len(log) else {}
    return {"gan_iterations": len(log), "gan_final_d_objective": last.get("d_objective"),
            "gan_final_g_objective": last.get("g_objective")}


def generated_samples(cfg: ExperimentConfig, out: Path, n: int, seed: int, stage: str) -> np.ndarray:
    """``n`` generator outputs in the normalised data range."""
    model = load_gan(_require(out, GAN_FILE, stage))
    pool = None
    if model.prior == "lcc" and cfg.sampler.pool == "embeddings":
        ae = load_autoencoder(_require(out, AE_FILE, stage))
        pool = embed(ae, load_data(cfg)[0])
    inputs, _ = sample_generator_batch(model, n, seed, cfg.sampler.d, cfg.sampler.prior, pool)
    return generate_from_input(model, inputs)


def stage_sample(cfg: ExperimentConfig, out: Path, n: int, path: Optional[Path] = None) -> Path:
    train, _ = load_data(cfg)
    x = generated_samples(cfg, out, n, derive_seed(cfg.seed, _SAMPLE), "sample")
    raw = train.to_raw(x)
    path = path or out / "samples.csv"
    write_csv(raw, path, [f"x{i}" for i in range(raw.shape[1])])
    side = image_side(train)
    if side:
        write_pgm_grid(x, side, path.with_suffix(".pgm"), cfg.eval.grid)
    return path


def stage_eval(cfg: ExperimentConfig, out: Path) -> dict:
    train, _ = load_data(cfg)
    x = generated_samples(cfg, out, cfg.eval.n_samples, derive_seed(cfg.seed, _EVAL), "eval")
    metrics: Dict[str, object] = {"n_samples": len(x)}
    spec = manifold_spec(cfg)
    if spec is not None and spec.kind == "ring_of_gaussians":
        radius = cfg.eval.coverage_radius or 3.0 * spec.sigma
        cov = mode_coverage(train.to_raw(x), spec.mode_centers(), radius)
        metrics.update(mode_coverage=cov.covered, n_modes=cov.n_modes, mode_histogram=cov.histogram,
                       coverage_radius=radius, unassigned=cov.unassigned)
    side = image_side(train)
    if side:
        metrics["diversity_msssim"] = diversity_msssim(x.reshape(len(x), side, side), cfg.eval.msssim_pairs,
                                                       derive_seed(cfg.seed, _EVAL, 1))
        metrics["data_diversity_msssim"] = diversity_msssim(train.samples.reshape(len(train), side, side),
                                                            cfg.eval.msssim_pairs, derive_seed(cfg.seed, _EVAL, 1))
        write_pgm_grid(x, side, out / "eval_samples.pgm", cfg.eval.grid)
    write_csv(train.to_raw(x[: min(len(x), 1000)]), out / "eval_samples.csv")
    return metrics


def stage_gap(cfg: ExperimentConfig, out: Path) -> dict:
    model = load_gan(_require(out, GAN_FILE, "gap"))
    train, held = load_data(cfg)
    g = cfg.gap
    cls = DiscClassConfig(hidden=(g.hidden,), steps=g.steps, restarts=g.restarts)
    gcfg = GapConfig(n_generated=g.n_generated, confidence=g.confidence, rademacher_draws=g.rademacher_draws,
                     disc_class=cls, d=cfg.sampler.d, coding_prior=cfg.sampler.prior,
                     seed=derive_seed(cfg.seed, _GAP))
    report = gap_harness(model, train, held, gcfg)
    report.write(out / GAP_FILE, out / "gap_vs_bound.csv")
    return {"gap": report.gap, "bound_value": report.bound_value, "gap_within_bound": report.gap <= report.bound_value,
            "gap_identities_hold": report.identities_hold()}


# -- whole pipeline -------------------------------------------------------------

@dataclass
class RunResult:
    status: int
    out: Path
    metrics: dict
    completed: List[str]
    failed: Optional[str] = None
    error: str = ""


def run_pipeline(cfg: ExperimentConfig, out=None, stages=None, merge: bool = False) -> RunResult:
    """Run the stages in order; stop at the first failure and record it in the MANIFEST.

    ``metrics.json`` collects the deterministic outputs of every completed
    stage.  With ``merge`` the entries of an existing ``metrics.json`` are kept.
    """
    cfg.validate()
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.txt")
    stages = list(stages or [s for s in STAGES if s != "gap" or cfg.gap.enabled])
    runners = {"train-ae": stage_train_ae, "learn-lcc": stage_learn_lcc, "train-gan": stage_train_gan,
               "eval": stage_eval, "gap": stage_gap}
    metrics: dict = {"seed": cfg.seed}
    if merge and (out / METRICS_FILE).is_file():
        metrics = {**read_metrics(out), "seed": cfg.seed}
    completed: List[str] = []
    for stage in stages:
        try:
            metrics[stage] = runners[stage](cfg, out)
        except Exception as exc:  # any failure ends the run; artifacts so far are kept
            write_json(out / METRICS_FILE, metrics)
            write_manifest(out, completed, stage, f"{type(exc).__name__}: {exc}")
            return RunResult(3, out, metrics, completed, stage, f"{type(exc).__name__}: {exc}")
        completed.append(stage)
        write_json(out / METRICS_FILE, metrics)
    write_manifest(out, completed)
    return RunResult(0, out, metrics, completed)


def read_metrics(out) -> dict:
    return json.loads((Path(out) / METRICS_FILE).read_text())


def read_trainlog(out) -> TrainLog:
    return TrainLog.read_jsonl(Path(out) / "trainlog.jsonl")
