"""Time-uniform PAC-Bayes bounds, confidence sequences and a seeded coverage harness."""
from .divergences import (
    DiagonalGaussian,
    FiniteMixture,
    kl_divergence,
    kl_inv_upper,
    klsf,
    renyi_divergence,
    tv_distance,
)
from .exceptions import ConfigError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DiagonalGaussian",
    "FiniteMixture",
    "kl_divergence",
    "kl_inv_upper",
    "klsf",
    "renyi_divergence",
    "tv_distance",
]
