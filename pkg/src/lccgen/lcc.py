"""Local coordinate coding: anchors, affine sparse codings, and their alternating fit.

Objective minimised over codings ``gamma`` (rows sum to one) and anchors ``v``::

    sum_h  2 L_h ||h - V gamma(h)||^2  +  L_G sum_j |gamma_j(h)| ||v_j - h||^2

The residual term is squared so the smooth part has a Lipschitz gradient; the
unsquared variant is evaluated alongside for reporting.

Anchors are stored row-wise, ``anchors[j] == v_j``; ``Dictionary.V`` is the
column-stacked matrix.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .numeric.nn import dumps_json17
from .numeric.rng import SeedLike, make_rng
from .numeric.tensor import ShapeError

log = logging.getLogger(__name__)

OPTIMIZED = "optimized"
SAMPLED = "sampled"

MAX_CODING_ITERS = 2000
CODING_TOL = 1e-10
ANCHOR_RIDGE = 1e-8


@dataclass
class Dictionary:
    anchors: np.ndarray  # (M, d_B)
    lipschitz_h: float = 1.0
    lipschitz_g: float = 1.0

    def __post_init__(self):
        self.anchors = np.array(self.anchors, dtype=np.float64)
        if self.anchors.ndim != 2 or self.anchors.shape[0] < 2:
            raise ValueError("a dictionary needs at least two anchors (an M x d_B matrix)")
        if not np.all(np.isfinite(self.anchors)):
            raise ValueError("anchors contain NaN or Inf")
        if self.lipschitz_h <= 0 or self.lipschitz_g <= 0:
            raise ValueError("L_h and L_G must be positive")
        d = pairwise_sq_dists(self.anchors, self.anchors)
        np.fill_diagonal(d, np.inf)
        if d.min() <= 1e-24:
            raise ValueError("anchors must be pairwise distinct")
        self.anchors.flags.writeable = False

    @property
    def M(self) -> int:
        return self.anchors.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.anchors.shape[1]

    @property
    def V(self) -> np.ndarray:
        return self.anchors.T

    def to_dict(self) -> dict:
        return {"anchors": self.anchors.tolist(), "lipschitz_h": self.lipschitz_h,
                "lipschitz_g": self.lipschitz_g}

    @classmethod
    def from_dict(cls, d: dict) -> "Dictionary":
        return cls(np.asarray(d["anchors"], dtype=np.float64), float(d["lipschitz_h"]), float(d["lipschitz_g"]))


@dataclass
class Coding:
    gamma: np.ndarray
    origin: str = OPTIMIZED
    converged: bool = True

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        if self.origin not in (OPTIMIZED, SAMPLED):
            raise ValueError(f"unknown coding origin {self.origin!r}")

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.gamma)


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def reconstruct(dictionary: Dictionary, gamma) -> np.ndarray:
    """Physical approximation ``V gamma``; accepts one coding or a batch (N x M)."""
    g = gamma.gamma if isinstance(gamma, Coding) else np.asarray(gamma, dtype=np.float64)
    if g.shape[-1] != dictionary.M:
        raise ShapeError(f"coding length {g.shape[-1]} does not match M={dictionary.M}")
    # explicit sum over anchors: a row gives the same bits alone or inside a batch
    return np.sum(g[..., :, None] * dictionary.anchors, axis=-2)


def objective_terms(dictionary: Dictionary, H: np.ndarray, gammas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-point residual norms ``||h - r(h)||`` and locality penalties ``sum_j |g_j| ||v_j - h||^2``."""
    H = np.atleast_2d(H)
    gammas = np.atleast_2d(gammas)
    if H.shape[0] != gammas.shape[0] or H.shape[1] != dictionary.latent_dim or gammas.shape[1] != dictionary.M:
        raise ShapeError("points, codings and dictionary have inconsistent shapes")
    resid = np.linalg.norm(H - gammas @ dictionary.anchors, axis=1)
    locality = np.sum(np.abs(gammas) * pairwise_sq_dists(H, dictionary.anchors), axis=1)
    return resid, locality


def objective(dictionary: Dictionary, H: np.ndarray, gammas: np.ndarray, squared: bool = True) -> float:
    resid, locality = objective_terms(dictionary, H, gammas)
    first = resid ** 2 if squared else resid
    return float(np.sum(2.0 * dictionary.lipschitz_h * first + dictionary.lipschitz_g * locality))


def _row_objective(A: np.ndarray, H: np.ndarray, G: np.ndarray, W: np.ndarray, l_h: float, l_g: float) -> np.ndarray:
    r = H - G @ A
    return 2.0 * l_h * np.einsum("ij,ij->i", r, r) + l_g * np.sum(W * np.abs(G), axis=1)


def affine_soft_threshold(U: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Row-wise ``argmin_g 0.5||g - u||^2 + sum_j tau_j |g_j|  s.t.  sum_j g_j = 1``.

    The minimiser is ``soft(u - nu, tau)`` for the scalar shift ``nu`` that
    makes the row sum to one.  The row sum is piecewise linear and
    non-increasing in ``nu`` with breakpoints ``u_j -/+ tau_j``; it is
    evaluated at every sorted breakpoint with prefix sums and the root is then
    read off the linear piece that brackets it.
    """
    N, M = U.shape
    a = U - tau  # coordinate j is positive iff nu < a_j
    b = U + tau  # coordinate j is negative iff nu > b_j
    C = np.concatenate([a, b], axis=1)
    order = np.argsort(C, axis=1, kind="stable")
    p = np.take_along_axis(C, order, axis=1)
    is_a = order < M
    a_val = np.where(is_a, p, 0.0)
    b_val = np.where(is_a, 0.0, p)
    # a-breakpoints strictly after position k, b-breakpoints strictly before it
    a_cnt_after = np.cumsum(is_a[:, ::-1], axis=1)[:, ::-1] - is_a
    a_sum_after = np.cumsum(a_val[:, ::-1], axis=1)[:, ::-1] - a_val
    b_cnt_before = np.cumsum(~is_a, axis=1) - ~is_a
    b_sum_before = np.cumsum(b_val, axis=1) - b_val
    phi = (a_sum_after - p * a_cnt_after) - (p * b_cnt_before - b_sum_before)
    k = np.argmax(phi <= 1.0, axis=1)
    rows = np.arange(N)
    pk, phik = p[rows, k], phi[rows, k]
    # slope on the open interval just left of p_k
    slope = a_cnt_after[rows, k] + is_a[rows, k] + b_cnt_before[rows, k]
    nu = pk - (1.0 - phik) / np.maximum(slope, 1)
    nu = np.where(slope > 0, nu, pk)[:, None]
    return np.maximum(U - nu - tau, 0.0) - np.maximum(nu - U - tau, 0.0)


def _fix_sum(G: np.ndarray) -> np.ndarray:
    # push the rounding residual into the largest-magnitude entry of each row
    G = G.copy()
    rows = np.arange(G.shape[0])
    j = np.argmax(np.abs(G), axis=1)
    G[rows, j] += 1.0 - G.sum(axis=1)
    return G


def nearest_one_hot(dictionary: Dictionary, H: np.ndarray) -> np.ndarray:
    d = pairwise_sq_dists(H, dictionary.anchors)
    G = np.zeros((H.shape[0], dictionary.M))
    G[np.arange(H.shape[0]), np.argmin(d, axis=1)] = 1.0
    return G


def _fista(Ak: np.ndarray, H: np.ndarray, Wk: np.ndarray, l_h: float, l_g: float, G0: np.ndarray,
           max_iters: int, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Accelerated proximal gradient for rows with their own anchor sets ``Ak`` (n, K, d_B)."""
    # Shifts along the all-ones direction are absorbed by the affine prox, so the
    # step only has to respect the curvature of the centred anchor Gram matrix.
    centred = Ak - Ak.mean(axis=1, keepdims=True)
    lam = np.linalg.norm(centred, 2, axis=(1, 2)) ** 2
    step = 1.0 / (4.0 * l_h * np.maximum(lam, 1e-12))
    tau_all = step[:, None] * l_g * Wk
    X = G0.copy()
    Y = X.copy()
    t = np.ones(len(H))
    active = np.ones(len(H), dtype=bool)
    converged = np.zeros(len(H), dtype=bool)
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        y, a = Y[idx], Ak[idx]
        resid = np.einsum("nk,nkd->nd", y, a) - H[idx]
        grad = 4.0 * l_h * np.einsum("nkd,nd->nk", a, resid)
        x_new = affine_soft_threshold(y - step[idx, None] * grad, tau_all[idx])
        x_old = X[idx]
        change = np.max(np.abs(x_new - x_old), axis=1)
        t_old = t[idx]
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_old * t_old))
        # restart momentum where it points uphill
        restart = np.einsum("ij,ij->i", y - x_new, x_new - x_old) > 0
        t_new = np.where(restart, 1.0, t_new)
        beta = np.where(restart, 0.0, (t_old - 1.0) / t_new)
        X[idx] = x_new
        Y[idx] = x_new + beta[:, None] * (x_new - x_old)
        t[idx] = t_new
        done = change < tol
        converged[idx[done]] = True
        active[idx[done]] = False
    return X, converged


def kkt_violation(A: np.ndarray, H: np.ndarray, G: np.ndarray, W: np.ndarray, l_h: float, l_g: float) -> np.ndarray:
    """Largest optimality violation per row, over anchors outside the coding's support."""
    grad = 4.0 * l_h * (G @ A - H) @ A.T
    on = G != 0
    # on the support, grad_j + nu + l_g w_j sign(g_j) = 0 fixes the multiplier nu
    nu_j = -grad - l_g * W * np.sign(G)
    nu = np.sum(np.where(on, nu_j, 0.0), axis=1) / np.maximum(on.sum(axis=1), 1)
    slack = np.abs(grad + nu[:, None]) - l_g * W
    return np.max(np.where(on, 0.0, np.maximum(slack, 0.0)), axis=1)


def code_points(dictionary: Dictionary, H: np.ndarray, init: Optional[np.ndarray] = None,
                max_iters: int = MAX_CODING_ITERS, tol: float = CODING_TOL,
                n_candidates: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Optimal affine codings for every row of ``H`` with the anchors held fixed.

    Each row is first solved over its ``n_candidates`` nearest anchors
    (default ``2 d_B + 4``); rows whose solution violates the optimality
    conditions of the full problem are then re-solved over all anchors.  The
    solver is accelerated proximal gradient with adaptive restart, and a row
    stops once its iterate moves less than ``tol``.  A row never ends with a
    larger objective than its starting coding (``init``, default
    nearest-anchor one-hot), which keeps the alternating fit monotone.

    Returns ``(gammas, converged)``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    if H.shape[1] != dictionary.latent_dim or not np.all(np.isfinite(H)):
        raise ShapeError(f"latent points must be finite with {dictionary.latent_dim} columns")
    A = dictionary.anchors
    N, M = H.shape[0], dictionary.M
    l_h, l_g = dictionary.lipschitz_h, dictionary.lipschitz_g
    W = pairwise_sq_dists(H, A)
    G0 = nearest_one_hot(dictionary, H) if init is None else _fix_sum(np.array(init, dtype=np.float64))
    K = min(M, 2 * dictionary.latent_dim + 4 if n_candidates is None else max(int(n_candidates), 2))

    cand = np.argsort(W, axis=1, kind="stable")[:, :K]
    sub0 = np.take_along_axis(G0, cand, axis=1)
    outside = np.abs(sub0.sum(axis=1) - 1.0) > 1e-12
    sub0[outside] = 0.0
    sub0[outside, 0] = 1.0
    Xk, converged = _fista(A[cand], H, np.take_along_axis(W, cand, axis=1), l_h, l_g, sub0, max_iters, tol)
    X = np.zeros((N, M))
    np.put_along_axis(X, cand, Xk, axis=1)

    if K < M:
        scale = max(1.0, l_g * float(W.max()))
        redo = np.flatnonzero(kkt_violation(A, H, X, W, l_h, l_g) > 1e-8 * scale)
        if redo.size:
            full = np.broadcast_to(A, (redo.size, M, A.shape[1]))
            X[redo], converged[redo] = _fista(full, H[redo], W[redo], l_h, l_g, X[redo], max_iters, tol)
    X = _fix_sum(X)
    worse = _row_objective(A, H, X, W, l_h, l_g) > _row_objective(A, H, G0, W, l_h, l_g)
    X[worse] = G0[worse]
    return X, converged


def code_point(dictionary: Dictionary, h) -> Coding:
    gammas, converged = code_points(dictionary, np.asarray(h, dtype=np.float64)[None, :])
    return Coding(gammas[0], OPTIMIZED, bool(converged[0]))


def update_anchors(dictionary: Dictionary, H: np.ndarray, gammas: np.ndarray,
                   ridge: float = ANCHOR_RIDGE) -> Dictionary:
    """Least-squares anchor update with codings held fixed.

    Unused anchors (no coding weight) keep their position.  The update is
    rejected if the ridge term makes the objective worse.
    """
    l_h, l_g = dictionary.lipschitz_h, dictionary.lipschitz_g
    absg = np.abs(gammas)
    used = np.flatnonzero(absg.sum(axis=0) > 0)
    Gu, Au = gammas[:, used], absg[:, used]
    lhs = 4.0 * l_h * (Gu.T @ Gu) + 2.0 * l_g * np.diag(Au.sum(axis=0)) + ridge * np.eye(len(used))
    rhs = 4.0 * l_h * (Gu.T @ H) + 2.0 * l_g * (Au.T @ H)
    # fold the contribution of fixed unused anchors (zero when unused columns are exactly zero)
    anchors = dictionary.anchors.copy()
    anchors[used] = np.linalg.solve(lhs, rhs)
    try:
        candidate = Dictionary(anchors, l_h, l_g)
    except ValueError:
        return dictionary
    if objective(candidate, H, gammas) > objective(dictionary, H, gammas):
        return dictionary
    return candidate


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[c] = X[idx]
        closest = np.minimum(closest, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def kmeans(X: np.ndarray, k: int, seed: SeedLike, iters: int = 20,
           init: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List[str]]:
    """k-means with k-means++ seeding (or explicit ``init`` centers).

    Empty clusters are re-seeded from a random data point and the event is
    recorded in the returned log.
    """
    rng = make_rng(seed)
    n = X.shape[0]
    events: List[str] = []
    centers = _kmeans_pp(X, k, rng) if init is None else np.array(init, dtype=np.float64)
    for it in range(iters):
        labels = np.argmin(pairwise_sq_dists(X, centers), axis=1)
        for c in range(len(centers)):
            members = X[labels == c]
            if len(members) == 0:
                centers[c] = X[rng.integers(n)]
                events.append(f"kmeans iter {it}: cluster {c} empty, re-seeded from a random point")
                log.info(events[-1])
            else:
                centers[c] = members.mean(axis=0)
    return centers, events


def _distinct_init(H: np.ndarray, centers: np.ndarray, rng: np.random.Generator, events: List[str]) -> np.ndarray:
    # k-means can hand back coincident centroids on duplicated data; nudge them apart onto data points
    for _ in range(100):
        d = pairwise_sq_dists(centers, centers)
        np.fill_diagonal(d, np.inf)
        dup = np.argwhere(d <= 1e-24)
        if len(dup) == 0:
            return centers
        j = int(dup[0, 1])
        centers[j] = H[rng.integers(len(H))]
        events.append(f"anchor {j} coincided with another; re-seeded from a random point")
    raise ValueError("could not find M distinct initial anchors; the data has fewer than M distinct points")


@dataclass
class LccFit:
    dictionary: Dictionary
    gammas: np.ndarray
    trace: List[float]
    unsquared_trace: List[float]
    converged: np.ndarray
    events: List[str] = field(default_factory=list)

    def codings(self) -> List[Coding]:
        return [Coding(g, OPTIMIZED, bool(c)) for g, c in zip(self.gammas, self.converged)]

    def __iter__(self):
        return iter((self.dictionary, self.gammas, self.trace))


def learn_dictionary(H: np.ndarray, M: int, lipschitz_h: float = 1.0, lipschitz_g: float = 1.0,
                     outer_iters: int = 50, seed: SeedLike = 0, kmeans_iters: int = 20) -> LccFit:
    """Alternate coding and anchor updates starting from k-means anchors."""
    H = np.asarray(H, dtype=np.float64)
    if M < 2:
        raise ValueError("M must be >= 2")
    if H.shape[0] < M:
        raise ValueError(f"need at least M={M} points, got {H.shape[0]}")
    rng = make_rng(seed)
    centers, events = kmeans(H, M, rng, kmeans_iters)
    centers = _distinct_init(H, centers, rng, events)
    dictionary = Dictionary(centers, lipschitz_h, lipschitz_g)
    gammas = None
    converged = np.zeros(len(H), dtype=bool)
    trace, unsquared = [], []
    for _ in range(outer_iters):
        gammas, converged = code_points(dictionary, H, init=gammas)
        dictionary = update_anchors(dictionary, H, gammas)
        trace.append(objective(dictionary, H, gammas))
        unsquared.append(objective(dictionary, H, gammas, squared=False))
    if gammas is None:
        gammas, converged = code_points(dictionary, H)
    return LccFit(dictionary, gammas, trace, unsquared, converged, events)


def mean_reconstruction_error(dictionary: Dictionary, H: np.ndarray, gammas: np.ndarray) -> float:
    return float(np.mean(np.linalg.norm(H - reconstruct(dictionary, gammas), axis=1)))


def save_dictionary(dictionary: Dictionary, path) -> None:
    Path(path).write_text(dumps_json17(dictionary.to_dict()) + "\n")


def load_dictionary(path) -> Dictionary:
    return Dictionary.from_dict(json.loads(Path(path).read_text()))


def write_codings_csv(gammas: np.ndarray, path) -> None:
    """Sparse triplets ``point,anchor,weight`` for every nonzero coding entry."""
    rows, cols = np.nonzero(gammas)
    with open(path, "w") as fh:
        fh.write("point,anchor,weight\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i},{j},{format(gammas[i, j], '.17g')}\n")


def read_codings_csv(path, n_points: int, M: int) -> np.ndarray:
    gammas = np.zeros((n_points, M))
    with open(path) as fh:
        next(fh)
        for line in fh:
            i, j, w = line.strip().split(",")
            gammas[int(i), int(j)] = float(w)
    return gammas
