"""Distances, complexity estimates, approximation checks and sample-quality scores."""
from .approximation import LemmaReport, check_lemma1, check_lemma2, generative_quality, lemma1_sides, lemma2_sides
from .classes import DiscClassConfig
from .coverage import Coverage, mode_coverage
from .distance import DistanceEstimate, estimate_nn_distance, estimate_rademacher, nn_distance_detail
from .gap import GapConfig, GapReport, bound_value, gap_harness, load_report, make_report
from .image import diversity_msssim, ms_ssim, ms_ssim_detail
from .lipschitz import (
    LipschitzConstants,
    LipschitzEstimate,
    box_sampler,
    estimate_gan_lipschitz,
    estimate_lipschitz,
    mixture_sampler,
    pair_sampler,
)

__all__ = [
    "Coverage",
    "DiscClassConfig",
    "DistanceEstimate",
    "GapConfig",
    "GapReport",
    "LemmaReport",
    "LipschitzConstants",
    "LipschitzEstimate",
    "bound_value",
    "box_sampler",
    "check_lemma1",
    "check_lemma2",
    "diversity_msssim",
    "estimate_gan_lipschitz",
    "estimate_lipschitz",
    "estimate_nn_distance",
    "estimate_rademacher",
    "gap_harness",
    "generative_quality",
    "lemma1_sides",
    "lemma2_sides",
    "load_report",
    "make_report",
    "mixture_sampler",
    "ms_ssim",
    "ms_ssim_detail",
    "mode_coverage",
    "nn_distance_detail",
    "pair_sampler",
]
