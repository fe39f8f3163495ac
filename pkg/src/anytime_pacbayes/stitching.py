"""Arithmetic for geometric-epoch stitching and the binomial kl moment xi(k)."""
from __future__ import annotations

from functools import lru_cache
from math import log, log2, pi

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

ZETA2 = pi**2 / 6


def _check_time(t):
    t_arr = np.asarray(t)
    if np.any(t_arr < 1):
        raise ValueError("time index must be >= 1")
    return t_arr


def eta(t):
    """Start of the dyadic epoch containing t: 2**floor(log2 t)."""
    t_arr = _check_time(t).astype(np.int64)
    if t_arr.ndim == 0:
        return 1 << (int(t_arr).bit_length() - 1)
    _, exponent = np.frexp(t_arr.astype(float))
    return np.left_shift(np.ones_like(t_arr), exponent.astype(np.int64) - 1)


def ell(k):
    """Epoch error weight k**2 * zeta(2); sums of 1/ell over k >= 1 equal 1."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 1):
        raise ValueError("ell needs k >= 1")
    out = k_arr**2 * ZETA2
    return float(out) if out.ndim == 0 else out


def il(t):
    """Iterated-log price ln(ell(log2(2t))) paid for stitching over epochs."""
    t_arr = _check_time(t).astype(float)
    out = 2.0 * np.log(np.log2(2.0 * t_arr)) + log(ZETA2)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=4096)
def log_xi(k: int) -> float:
    """ln xi(k), xi(k) = sum_l C(k,l) (l/k)^l (1-l/k)^(k-l), summed in log domain."""
    if k < 1 or int(k) != k:
        raise ValueError("xi needs a positive integer")
    k = int(k)
    ls = np.arange(k + 1, dtype=float)
    frac = ls / k
    terms = (
        gammaln(k + 1) - gammaln(ls + 1) - gammaln(k - ls + 1)
        + xlogy(ls, frac) + xlogy(k - ls, 1.0 - frac)
    )
    # l = 0 and l = k contribute exactly 1
    terms[0] = 0.0
    terms[-1] = 0.0
    return float(logsumexp(terms))


def xi(k: int) -> float:
    return float(np.exp(log_xi(k)))


def log_xi_eta(t) -> np.ndarray:
    """ln xi(eta(t)) for an array of times, sharing the cache across epochs."""
    e = np.asarray(eta(t))
    if e.ndim == 0:
        return np.asarray(log_xi(int(e)))
    uniq, inv = np.unique(e, return_inverse=True)
    vals = np.array([log_xi(int(u)) for u in uniq])
    return vals[inv].reshape(e.shape)


def epochs_up_to(t_max: int) -> list[int]:
    return [1 << j for j in range(int(log2(t_max)) + 1)]
