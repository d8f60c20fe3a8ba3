"""Neural-network distance and empirical Rademacher complexity by inner gradient ascent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gan import phi_constant, phi_tensor
from ..numeric import make_rng
from ..numeric import tensor as T
from ..numeric.rng import SeedLike
from .classes import ClassLike, Family, as_class_config, maximize


def _as_samples(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("sample sets must be non-empty (n, d) arrays")
    return x


@dataclass
class DistanceEstimate:
    """``distance = max(0, best signed objective - phi_c)``.

    The signed two-sample objective is what the ascent maximises;
    ``abs_objective`` is ``|best signed objective|``, reported alongside.
    The supremum is approximated from below by ``restarts`` ascents of
    ``steps`` Adam steps each.
    """

    distance: float
    signed_objective: float
    abs_objective: float
    phi_c: float
    steps: int
    restarts: int
    diverged: bool

    def __float__(self) -> float:
        return self.distance


def nn_distance_detail(mu_samples, nu_samples, phi: str = "log", disc_class: ClassLike = None,
                       seed: SeedLike = 0) -> DistanceEstimate:
    mu, nu = _as_samples(mu_samples), _as_samples(nu_samples)
    if mu.shape[1] != nu.shape[1]:
        raise ValueError("both sample sets must live in the same space")
    cfg = as_class_config(disc_class)
    family = Family(cfg, mu.shape[1], (mu, nu))
    d_mu, d_nu = family.bind(mu), family.bind(nu)

    def objective(params):
        return T.mean(phi_tensor(phi, d_mu(params))) + T.mean(phi_tensor(phi, 1.0 - d_nu(params)))

    res = maximize(family, objective, make_rng(seed))
    c = phi_constant(phi)
    return DistanceEstimate(max(0.0, res.best - c), res.best, abs(res.best), c, cfg.steps, cfg.restarts,
                            res.diverged)


def estimate_nn_distance(mu_samples, nu_samples, phi: str = "log", disc_class: ClassLike = None,
                         seed: SeedLike = 0) -> float:
    """``sup_F E_mu phi(D(x)) + E_nu phi(1 - D(y)) - 2 phi(1/2)``, floored at 0."""
    return nn_distance_detail(mu_samples, nu_samples, phi, disc_class, seed).distance


def estimate_rademacher(samples, phi: str = "identity", disc_class: ClassLike = None, K: int = 10,
                        seed: SeedLike = 0) -> float:
    """Mean over ``K`` sign draws of ``sup_F (1/N) sum sigma_i phi(D(x_i))``."""
    x = _as_samples(samples)
    if K < 1:
        raise ValueError("K must be >= 1")
    cfg = as_class_config(disc_class)
    family = Family(cfg, x.shape[1], (x,))
    d_x = family.bind(x)
    rng = make_rng(seed)
    maxima = []
    for _ in range(K):
        sigma = rng.choice(np.array([-1.0, 1.0]), size=(len(x), 1))

        def objective(params, sigma=sigma):
            return T.mean(T.mul(phi_tensor(phi, d_x(params)), sigma))

        maxima.append(maximize(family, objective, rng).best)
    return float(np.mean(maxima))
