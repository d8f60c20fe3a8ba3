"""Mode coverage: how many mixture components receive a share of the generated samples."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List

import numpy as np

MIN_FRACTION = 0.01


@dataclass
class Coverage:
    covered: int
    n_modes: int
    histogram: List[int]  # samples within radius of each mode (nearest-center assignment)
    unassigned: int

    def to_dict(self) -> dict:
        return asdict(self)


def mode_coverage(samples, mode_centers, radius: float, min_fraction: float = MIN_FRACTION) -> Coverage:
    """A mode is covered when at least ``min_fraction`` of all samples lie within ``radius`` of it."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(mode_centers, dtype=np.float64))
    if len(centers) == 0 or radius <= 0:
        raise ValueError("need at least one center and a positive radius")
    dist = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=2)
    nearest = np.argmin(dist, axis=1)
    inside = dist[np.arange(len(x)), nearest] <= radius
    hist = np.bincount(nearest[inside], minlength=len(centers))
    covered = int(np.sum(hist >= min_fraction * len(x)))
    return Coverage(covered, len(centers), hist.tolist(), int(np.sum(~inside)))
