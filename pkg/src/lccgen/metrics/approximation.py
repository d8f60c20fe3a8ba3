"""Generative quality Q and direct checks of the two coding approximation inequalities."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..lcc import Dictionary, pairwise_sq_dists, reconstruct
from ..numeric import NetworkParams, predict
from .lipschitz import LipschitzEstimate

# absolute slack for float rounding when comparing the two sides
ROUNDING_SLACK = 1e-12


def _terms(dictionary: Dictionary, gammas: np.ndarray, H: Optional[np.ndarray]):
    gammas = np.atleast_2d(np.asarray(gammas, dtype=np.float64))
    if len(gammas) == 0:
        raise ValueError("codings must be non-empty")
    r = reconstruct(dictionary, gammas)
    resid = np.zeros(len(r)) if H is None else np.linalg.norm(np.atleast_2d(H) - r, axis=1)
    spread = np.sum(np.abs(gammas) * pairwise_sq_dists(r, dictionary.anchors), axis=1)
    return gammas, r, resid, spread


def generative_quality(dictionary: Dictionary, gammas, H: Optional[np.ndarray] = None,
                       lipschitz_h: Optional[float] = None, lipschitz_g: Optional[float] = None) -> float:
    """Mean of ``L_h ||h - r(h)|| + L_G sum_v |gamma_v| ||v - r(h)||^2`` over the codings.

    Without ``H`` (sampled codings have no source point) ``h = r(h)``.  The
    constants default to the dictionary's weights.
    """
    l_h = dictionary.lipschitz_h if lipschitz_h is None else lipschitz_h
    l_g = dictionary.lipschitz_g if lipschitz_g is None else lipschitz_g
    _, _, resid, spread = _terms(dictionary, gammas, H)
    return float(np.mean(l_h * resid + l_g * spread))


@dataclass
class LemmaReport:
    holds_fraction: float
    min_margin: float
    mean_margin: float
    max_lhs: float
    n: int
    slack: float = ROUNDING_SLACK

    def to_dict(self) -> dict:
        return asdict(self)


def _report(lhs: np.ndarray, rhs: np.ndarray) -> LemmaReport:
    margin = rhs - lhs
    return LemmaReport(float(np.mean(lhs <= rhs + ROUNDING_SLACK)), float(margin.min()), float(margin.mean()),
                       float(lhs.max()), int(len(lhs)))


def lemma1_sides(gen: NetworkParams, dictionary: Dictionary, gammas, H: Optional[np.ndarray],
                 lip: LipschitzEstimate):
    gammas, r, resid, spread = _terms(dictionary, gammas, H)
    lhs = np.linalg.norm(predict(gen, r) - gammas @ predict(gen, dictionary.anchors), axis=1)
    rhs = 2.0 * lip.L_h * resid + lip.L_G * spread
    return lhs, rhs


def check_lemma1(gen: NetworkParams, dictionary: Dictionary, gammas, lip: LipschitzEstimate,
                 H: Optional[np.ndarray] = None) -> LemmaReport:
    """``||G(sum gamma v) - sum gamma G(v)|| <= 2 L_h ||h - r|| + L_G sum |gamma| ||v - r||^2`` per coding."""
    return _report(*lemma1_sides(gen, dictionary, gammas, H, lip))


def lemma2_sides(disc: NetworkParams, gen: NetworkParams, dictionary: Dictionary, gammas,
                 H: Optional[np.ndarray], lip: LipschitzEstimate):
    gammas, r, resid, spread = _terms(dictionary, gammas, H)
    h = r if H is None else np.atleast_2d(H)
    lhs = np.abs(predict(disc, predict(gen, h)) - predict(disc, gammas @ predict(gen, dictionary.anchors)))[:, 0]
    rhs = lip.L_x * lip.L_h * resid + lip.L_x * lip.L_G * spread
    return lhs, rhs


def check_lemma2(disc: NetworkParams, gen: NetworkParams, dictionary: Dictionary, gammas,
                 lip: LipschitzEstimate, H: Optional[np.ndarray] = None) -> LemmaReport:
    """``|D(G(h)) - D(sum gamma G(v))| <= L_x L_h ||h - r|| + L_x L_G sum |gamma| ||v - r||^2`` per coding."""
    return _report(*lemma2_sides(disc, gen, dictionary, gammas, H, lip))
