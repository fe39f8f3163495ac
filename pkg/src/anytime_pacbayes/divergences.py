"""Divergences between finite mixtures and diagonal Gaussians, plus binary kl tools."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .exceptions import ConfigError

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class FiniteMixture:
    """Probability vector over a finite parameter set."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("mixture weights must be a nonempty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ConfigError("mixture weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ConfigError(f"mixture weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, k: int) -> "FiniteMixture":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def normalized(cls, w) -> "FiniteMixture":
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum())

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class DiagonalGaussian:
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        v = np.atleast_1d(np.asarray(self.variance, dtype=float))
        if m.shape != v.shape:
            raise ConfigError("mean and variance must have the same shape")
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ConfigError("variances must be positive and finite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "variance", v)


def _check_unit(x, name):
    if np.any(np.isnan(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"{name} must lie in [0, 1]")


def klsf(p, q):
    """Binary kl(p||q) with 0 ln 0 = 0. Works elementwise on arrays.

    Returns +inf when q is 0 or 1 and p differs from it.
    """
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    _check_unit(p_arr, "p")
    _check_unit(q_arr, "q")
    out = rel_entr(p_arr, q_arr) + rel_entr(1.0 - p_arr, 1.0 - q_arr)
    if out.ndim == 0:
        return float(out)
    return out


def kl_inv_upper(p_hat: float, c: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Largest q in [p_hat, 1] with klsf(p_hat||q) <= c, by bisection."""
    _check_unit(np.asarray(p_hat, dtype=float), "p_hat")
    if not c >= 0:
        raise ValueError("budget c must be nonnegative")
    p_hat = float(p_hat)
    if c == 0 or p_hat == 1.0:
        return p_hat
    lo, hi = p_hat, 1.0
    if klsf(p_hat, np.nextafter(1.0, 0.0)) <= c:
        return 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if klsf(p_hat, mid) <= c:
            lo = mid
        else:
            hi = mid
    return lo


def kl_divergence(rho, nu) -> float:
    """KL(rho||nu) for two finite mixtures or two diagonal Gaussians."""
    if isinstance(rho, FiniteMixture) and isinstance(nu, FiniteMixture):
        if len(rho) != len(nu):
            raise ConfigError("mixtures have different support sizes")
        return float(np.sum(rel_entr(rho.weights, nu.weights)))
    if isinstance(rho, DiagonalGaussian) and isinstance(nu, DiagonalGaussian):
        if rho.mean.shape != nu.mean.shape:
            raise ConfigError("Gaussians have different dimensions")
        ratio = rho.variance / nu.variance
        quad = (rho.mean - nu.mean) ** 2 / nu.variance
        return float(0.5 * np.sum(ratio + quad - 1.0 - np.log(ratio)))
    raise ConfigError("kl_divergence needs two distributions of the same family")


def kl_rows(rho: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Row-wise KL(rho_t||nu) for a (T, K) array of posteriors."""
    return np.sum(rel_entr(rho, nu[None, :]), axis=1)


def renyi_divergence(rho: FiniteMixture, nu: FiniteMixture, alpha: float) -> float:
    """Order-alpha Renyi divergence, ln(sum rho^a nu^(1-a)) / (a - 1), for a > 1."""
    if not alpha > 1:
        raise ConfigError("Renyi order must exceed 1")
    if len(rho) != len(nu):
        raise ConfigError("mixtures have different support sizes")
    return float(renyi_rows(rho.weights[None, :], nu.weights, alpha)[0])


def renyi_rows(rho: np.ndarray, nu: np.ndarray, alpha: float) -> np.ndarray:
    rho = np.atleast_2d(rho)
    mask = rho > 0
    off_support = np.any(mask & (nu == 0)[None, :], axis=1)
    with np.errstate(divide="ignore"):
        logs = np.where(mask, alpha * np.log(np.where(mask, rho, 1.0)), -np.inf)
        logs = logs + (1.0 - alpha) * np.log(np.where(nu > 0, nu, 1.0))[None, :]
    m = logs.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.sum(np.exp(logs - m), axis=1))
    return np.where(off_support, np.inf, lse / (alpha - 1.0))


def tv_distance(rho: FiniteMixture, nu: FiniteMixture) -> float:
    if len(rho) != len(nu):
        raise ConfigError("mixtures have different support sizes")
    return float(0.5 * np.sum(np.abs(rho.weights - nu.weights)))


__all__ = [
    "FiniteMixture",
    "DiagonalGaussian",
    "klsf",
    "kl_inv_upper",
    "kl_divergence",
    "kl_rows",
    "renyi_divergence",
    "renyi_rows",
    "tv_distance",
]
