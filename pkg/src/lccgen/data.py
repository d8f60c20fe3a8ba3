"""Training sets: synthetic manifolds, IDX digit files, normalization and splits."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .numeric.rng import SeedLike, make_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MANIFOLD_KINDS = ("ring_of_gaussians", "swiss_roll", "two_circles")
_NATURAL_DIM = {"ring_of_gaussians": 2, "swiss_roll": 3, "two_circles": 2}
_INTRINSIC_DIM = {"ring_of_gaussians": 1, "swiss_roll": 2, "two_circles": 1}


class ConfigError(ValueError):
    pass


class IdxFormatError(ValueError):
    pass


class IdxTruncatedError(OSError):
    pass


@dataclass(frozen=True)
class Normalization:
    """Per-feature affine map ``x_norm = (x - shift) / scale``."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.shift


@dataclass
class Dataset:
    samples: np.ndarray
    name: str = "dataset"
    labels: Optional[np.ndarray] = None
    normalization: Optional[Normalization] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be an N x d matrix with N >= 1")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain NaN or Inf")
        if self.labels is not None and len(self.labels) != len(self.samples):
            raise ValueError("labels and samples differ in length")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def is_normalized(self) -> bool:
        return self.normalization is not None

    def subset(self, idx: np.ndarray, name: Optional[str] = None) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return replace(self, samples=self.samples[idx], labels=labels, name=name or self.name,
                       meta=dict(self.meta))

    def to_raw(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        """Map normalized points (default: this dataset's samples) back to data units."""
        x = self.samples if x is None else np.asarray(x, dtype=np.float64)
        return x if self.normalization is None else self.normalization.invert(x)


@dataclass(frozen=True)
class ManifoldSpec:
    """A synthetic data manifold.

    ``curvature_const`` is the manifold constant from the latent-manifold
    definition; it is carried as an annotation only and never computed.
    """

    kind: str = "ring_of_gaussians"
    n_modes: int = 8
    radius: float = 2.0
    sigma: float = 0.05
    noise: float = 0.0
    ambient_dim: Optional[int] = None
    intrinsic_dim: Optional[int] = None
    seed: int = 0
    curvature_const: Optional[float] = None

    def __post_init__(self):
        if self.kind not in MANIFOLD_KINDS:
            raise ConfigError(f"unknown manifold kind {self.kind!r}; expected one of {MANIFOLD_KINDS}")
        if self.ambient_dim is None:
            object.__setattr__(self, "ambient_dim", _NATURAL_DIM[self.kind])
        if self.intrinsic_dim is None:
            object.__setattr__(self, "intrinsic_dim", _INTRINSIC_DIM[self.kind])
        if self.ambient_dim < _NATURAL_DIM[self.kind]:
            raise ConfigError(f"{self.kind} needs ambient_dim >= {_NATURAL_DIM[self.kind]}")
        if self.intrinsic_dim > self.ambient_dim:
            raise ConfigError("intrinsic_dim cannot exceed ambient_dim")

    def mode_centers(self) -> np.ndarray:
        if self.kind != "ring_of_gaussians":
            raise ConfigError("mode centers exist only for ring_of_gaussians")
        angles = 2 * np.pi * np.arange(self.n_modes) / self.n_modes
        centers = self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return _pad(centers, self.ambient_dim)


def _pad(x: np.ndarray, dim: int) -> np.ndarray:
    if x.shape[1] == dim:
        return x
    return np.hstack([x, np.zeros((x.shape[0], dim - x.shape[1]))])


def swiss_roll_parameter(n: int, rng: np.random.Generator) -> np.ndarray:
    return 1.5 * np.pi * (1.0 + 2.0 * rng.random(n))


def generate(spec: ManifoldSpec, n: int) -> Dataset:
    """Draw ``n`` points from ``spec``; a pure function of ``(spec, n)``."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = make_rng(spec.seed)
    labels = None
    if spec.kind == "ring_of_gaussians":
        labels = rng.integers(0, spec.n_modes, size=n)
        pts = spec.mode_centers()[labels, :2] + spec.sigma * rng.standard_normal((n, 2))
    elif spec.kind == "swiss_roll":
        t = swiss_roll_parameter(n, rng)
        y = 21.0 * rng.random(n)
        pts = np.stack([t * np.cos(t), y, t * np.sin(t)], axis=1)
        pts = pts + spec.noise * rng.standard_normal(pts.shape)
    else:
        labels = rng.integers(0, 2, size=n)
        angles = 2 * np.pi * rng.random(n)
        r = np.where(labels == 0, 1.0, 0.5)
        pts = np.stack([r * np.cos(angles), r * np.sin(angles)], axis=1)
        pts = pts + spec.noise * rng.standard_normal(pts.shape)
    return Dataset(_pad(pts, spec.ambient_dim), name=spec.kind, labels=labels,
                   meta={"intrinsic_dim": spec.intrinsic_dim})


def normalize(ds: Dataset) -> Dataset:
    """Min-max scale every feature into ``[-1, 1]``; constant features map to 0.

    The stored record always maps raw data to the normalized samples, so
    normalizing an already normalized dataset changes nothing.
    """
    x = ds.samples
    lo, hi = x.min(axis=0), x.max(axis=0)
    mid = (hi + lo) / 2.0
    half = (hi - lo) / 2.0
    half = np.where(half > 0, half, 1.0)
    out = (x - mid) / half
    # pin the extremes so a second pass sees exactly [-1, 1] and is the identity
    varying = hi > lo
    out = np.where(varying & (x == hi), 1.0, np.where(varying & (x == lo), -1.0, out))
    if ds.normalization is None:
        record = Normalization(mid, half)
    else:
        prev = ds.normalization
        record = Normalization(prev.shift + prev.scale * mid, prev.scale * half)
    return replace(ds, samples=np.clip(out, -1.0, 1.0), normalization=record, meta=dict(ds.meta))


def split(ds: Dataset, train_fraction: float, seed: SeedLike) -> Tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    n = len(ds)
    perm = make_rng(seed).permutation(n)
    n_train = int(round(train_fraction * n))
    n_train = min(max(n_train, 1), n - 1) if n > 1 else n_train
    return (ds.subset(perm[:n_train], f"{ds.name}/train"),
            ds.subset(perm[n_train:], f"{ds.name}/heldout"))


# -- IDX ----------------------------------------------------------------------

def _read_idx(path, expected_magic: int, kind: str) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise IdxTruncatedError(f"{path}: file too short for an IDX header")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x} is not an IDX {kind} file (0x{expected_magic:08x})")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxTruncatedError(f"{path}: truncated IDX dimension header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    payload = raw[header:header + count]
    if len(payload) < count:
        raise IdxTruncatedError(f"{path}: payload has {len(payload)} bytes, header promises {count}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx_images(images: np.ndarray, path) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols) + images.tobytes())


def write_idx_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes())


def area_pool_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row ``i`` averages input cells ``[i*n_in/n_out, (i+1)*n_in/n_out)`` weighted by overlap."""
    edges = np.arange(n_out + 1) * (n_in / n_out)
    cells = np.arange(n_in)
    lo = np.maximum(edges[:-1, None], cells[None, :])
    hi = np.minimum(edges[1:, None], cells[None, :] + 1)
    w = np.clip(hi - lo, 0.0, None)
    return w / w.sum(axis=1, keepdims=True)


def mean_pool(images: np.ndarray, side: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    rows = area_pool_matrix(images.shape[1], side)
    cols = area_pool_matrix(images.shape[2], side)
    return np.einsum("ir,nrc,jc->nij", rows, images, cols)


def load_idx(images_path, labels_path=None, downsample_to: int = 8) -> Dataset:
    """Read IDX digits, mean-pool to ``downsample_to`` squared, scale to ``[-1, 1]``."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, "images")
    if images.ndim != 3:
        raise IdxFormatError("image payload must be 3-D (count, rows, cols)")
    labels = None
    if labels_path is not None:
        labels = _read_idx(labels_path, IDX_LABELS_MAGIC, "labels").astype(np.int64)
        if len(labels) != len(images):
            raise IdxFormatError("image and label counts differ")
    pooled = mean_pool(images, downsample_to)
    flat = pooled.reshape(len(pooled), -1) / 127.5 - 1.0
    return Dataset(flat, name=f"idx{downsample_to}", labels=labels, meta={"side": downsample_to})


def digits_8x8() -> Dataset:
    """The 8x8 handwritten digit set bundled with scikit-learn, scaled to ``[-1, 1]``."""
    from sklearn.datasets import load_digits

    bunch = load_digits()
    return Dataset(bunch.data / 8.0 - 1.0, name="digits8", labels=bunch.target.astype(np.int64),
                   meta={"side": 8})


# -- export -------------------------------------------------------------------

def write_csv(rows: np.ndarray, path, header: Optional[list] = None) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") for v in row])


def read_csv(path, skip_header: bool = False) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if skip_header:
        rows = rows[1:]
    return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)


def to_csv(ds: Dataset, path) -> None:
    write_csv(ds.samples, path)
