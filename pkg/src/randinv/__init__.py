"""Inversion of random functions over finite sets."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Counts,
    Dist,
    RandomFn,
    RngStream,
    compose,
    empirical_distribution,
    kfold_explicit,
    kl_divergence,
    l2_distance,
    make_dist,
    make_random_fn,
    min_positive_prob,
    sample,
    variational_distance,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "Counts",
    "Dist",
    "RandomFn",
    "RngStream",
    "compose",
    "empirical_distribution",
    "kfold_explicit",
    "kl_divergence",
    "l2_distance",
    "make_dist",
    "make_random_fn",
    "min_positive_prob",
    "sample",
    "variational_distance",
]
