"""Confidence sequences for the posterior-averaged conditional mean of sub-Gaussian losses.

Both sequences are two-sided and hold simultaneously over t.  ``kl`` is the
divergence of the posterior the centre is computed under; it is frozen per
query, so a sequence built with one kl covers only posteriors within it.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np

from .exceptions import ConfigError
from .forward import LambdaSchedule


@dataclass(frozen=True)
class ConfidenceSequence:
    t: np.ndarray
    center: np.ndarray
    width: np.ndarray

    @property
    def lower(self):
        return self.center - self.width

    @property
    def upper(self):
        return self.center + self.width

    def contains(self, value) -> np.ndarray:
        return np.abs(np.asarray(value) - self.center) <= self.width


def _check(delta, sigma):
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta!r}")
    if not sigma > 0:
        raise ConfigError("sigma must be positive")


def subgaussian_cs(weighted_loss_sum, t, schedule: LambdaSchedule, sigma: float, kl, delta: float):
    """Interval from sum_i lambda_i E_rho f_i at time(s) t.

    centre = weighted sum / sum lambda_i,
    width = (ln(2/delta) + kl + sigma^2/2 sum lambda_i^2) / sum lambda_i.
    """
    _check(delta, sigma)
    t = np.atleast_1d(np.asarray(t, dtype=np.int64))
    lam_sum, lam_sq_sum = (arr[t - 1] for arr in schedule.partial_sums(int(t.max())))
    if np.any(lam_sum <= 0):
        raise ConfigError("sum of lambda must be positive")
    width = (log(2.0 / delta) + np.asarray(kl, dtype=float) + 0.5 * sigma**2 * lam_sq_sum) / lam_sum
    center = np.asarray(weighted_loss_sum, dtype=float) / lam_sum
    return ConfidenceSequence(t, center, width)


def subgaussian_cs_path(losses_rho, schedule: LambdaSchedule, sigma: float, kl, delta: float):
    """Whole trajectory for a fixed posterior, from per-step losses E_rho f_i."""
    losses_rho = np.asarray(losses_rho, dtype=float)
    horizon = losses_rho.size
    lam = schedule.values(horizon)
    return subgaussian_cs(np.cumsum(lam * losses_rho), np.arange(1, horizon + 1), schedule, sigma, kl, delta)


def stitched_cs_width(t, kl, delta: float, sigma: float = 1.0):
    """Half-width of the stitched sequence, with rate sqrt(ln ln t / t).

    For sigma-sub-Gaussian losses the unit-sigma width is applied to losses
    divided by sigma and scaled back, which multiplies it by sigma.
    """
    _check(delta, sigma)
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ValueError("t must be >= 1")
    base = log(6.3 / delta)
    head = 2.0 * np.sqrt((base + 1.4 * np.log(np.log2(2.0 * t))) / t)
    tail = np.asarray(kl, dtype=float) / np.sqrt((base + 1.4 * np.log(np.log2(t + 1.0))) * t)
    out = sigma * (head + tail)
    return float(out) if out.ndim == 0 else out


def stitched_cs(running_mean, t, kl, delta: float, sigma: float = 1.0) -> ConfidenceSequence:
    """Stitched sequence centred at the unweighted running mean of E_rho f_i."""
    width = np.atleast_1d(stitched_cs_width(t, kl, delta, sigma))
    return ConfidenceSequence(np.atleast_1d(t), np.atleast_1d(running_mean), width)


def default_lambda_schedule(delta: float, sigma: float, horizon_hint=None) -> LambdaSchedule:
    """lambda_t = sqrt(2 ln(2/delta)) / (sigma sqrt(t ln(t+1))).

    Decreasing in t, so it never exceeds lambda_1; the horizon is not needed.
    """
    _check(delta, sigma)
    return LambdaSchedule.sqrt_log(sqrt(2.0 * log(2.0 / delta)) / sigma)
