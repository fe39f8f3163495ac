"""Stitched bounds from reverse submartingales of convex functions of (empirical, true) risk.

On the epoch [2^k, 2^(k+1)) every bound uses the weight and log-MGF of the
epoch start eta(t), and pays the iterated-log price il(t) for the union over
epochs.  Target-time variants fix one n and hold for all t >= n without that
price.  Every function accepts numpy arrays for t, kl and r_hat.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log
from typing import Callable, NamedTuple

import numpy as np

from .divergences import klsf
from .exceptions import ConfigError
from .stitching import eta, il, log_xi, log_xi_eta

THIEMANN_GRID = np.linspace(0.01, 1.99, 199)


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta!r}")


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


class RiskBound(NamedTuple):
    value: float  # clipped to [0, 1]
    raw: float


def _risk(raw):
    raw = np.asarray(raw, dtype=float)
    return RiskBound(_scalar(np.clip(raw, 0.0, 1.0)), _scalar(raw))


def quadratic_phi(x, y):
    return 2.0 * (np.asarray(x) - np.asarray(y)) ** 2


def catoni_phi(c: float) -> Callable:
    """phi(x, y) = -c x - ln(1 - y (1 - e^-c)), convex in each argument."""
    if not c > 0:
        raise ConfigError("Catoni's constant must be positive")
    a = -np.expm1(-c)

    def phi(x, y):
        return -c * np.asarray(x) - np.log1p(-a * np.asarray(y))

    return phi


@dataclass(frozen=True)
class ConvexPhiSpec:
    """A convex phi(empirical, true), its weights lambda_j and log-MGF oracle.

    ``mgf_oracle(lam, j)`` must upper-bound the posterior average of
    ln E exp(lam * phi(R_hat_j, R)) over a sample of size j; the bound stays
    valid if the log is taken outside the posterior average.
    """

    phi: Callable
    mgf_oracle: Callable[[float, int], float]
    lambda_at: Callable[[int], float] = float


def maurer_spec() -> ConvexPhiSpec:
    """phi = klsf, lambda_j = j, with the distribution-free MGF bound ln xi(j)."""
    return ConvexPhiSpec(klsf, lambda lam, j: log_xi(int(j)), float)


def convex_phi_rhs_from_mgf(mgf, lam, t, kl, delta):
    """(mgf + kl + ln(1/delta) + il(t)) / lam, with mgf and lam taken at eta(t)."""
    return (mgf + kl + log(1.0 / delta) + il(t)) / lam


def convex_phi_rhs_stitched(spec: ConvexPhiSpec, t, kl, delta):
    """Bound on E_rho phi(R_hat_t, R), valid for all t >= 1 simultaneously."""
    _check_delta(delta)
    t = np.asarray(t)
    e_t = np.asarray(eta(t))
    uniq, inv = np.unique(e_t, return_inverse=True)
    lams = np.array([spec.lambda_at(int(j)) for j in uniq], dtype=float)
    if np.any(lams <= 0):
        raise ConfigError("lambda at an epoch start must be positive")
    mgfs = np.array([spec.mgf_oracle(lam, int(j)) for lam, j in zip(lams, uniq)], dtype=float)
    inv = inv.reshape(e_t.shape)
    return _scalar(convex_phi_rhs_from_mgf(mgfs[inv], lams[inv], t, np.asarray(kl, dtype=float), delta))


def convex_phi_rhs_target(spec: ConvexPhiSpec, n: int, t, kl, delta, lam: float | None = None):
    """Bound on E_rho phi(R_hat_t, R) for all t >= n; constant in t."""
    _check_delta(delta)
    if np.any(np.asarray(t) < n):
        raise ConfigError("target-time bound holds only for t >= n")
    lam = spec.lambda_at(n) if lam is None else lam
    if not lam > 0:
        raise ConfigError("lambda must be positive")
    out = (spec.mgf_oracle(lam, n) + np.asarray(kl, dtype=float) + log(1.0 / delta)) / lam
    return _scalar(np.broadcast_to(out, np.broadcast_shapes(np.shape(t), np.shape(out))))


def seeger_rhs(t, kl, delta):
    """Bound on E_rho klsf(R_hat_t || R), all t."""
    _check_delta(delta)
    e_t = eta(t)
    return _scalar((np.asarray(kl, dtype=float) + log_xi_eta(t) - log(delta) + il(t)) / e_t)


def seeger_rhs_target(n: int, kl, delta):
    _check_delta(delta)
    return _scalar((np.asarray(kl, dtype=float) + log_xi(int(n)) - log(delta)) / n)


def mcallester_bound(t, kl, delta, r_hat) -> RiskBound:
    """E_rho R <= r_hat + sqrt((kl + ln(2 sqrt(eta)/delta) + il) / (2 eta))."""
    _check_delta(delta)
    e_t = np.asarray(eta(t), dtype=float)
    slack = (np.asarray(kl, dtype=float) + np.log(2.0 * np.sqrt(e_t) / delta) + il(t)) / (2.0 * e_t)
    return _risk(np.asarray(r_hat) + np.sqrt(slack))


def mcallester_bound_target(n: int, kl, delta, r_hat) -> RiskBound:
    _check_delta(delta)
    slack = (np.asarray(kl, dtype=float) + log(2.0 * n / delta)) / (2.0 * n)
    return _risk(np.asarray(r_hat) + np.sqrt(slack))


def _thiemann_raw(e_t, complexity, lam, r_hat):
    denom = 1.0 - lam / 2.0
    return r_hat / denom + complexity / (e_t * denom * lam)


def thiemann_bound(t, kl, delta, lam, r_hat) -> RiskBound:
    """Risk bound valid simultaneously over lam in (0, 2)."""
    _check_delta(delta)
    if np.any(np.asarray(lam) <= 0) or np.any(np.asarray(lam) >= 2):
        raise ConfigError("Thiemann's lambda must lie in (0, 2)")
    e_t = np.asarray(eta(t), dtype=float)
    complexity = np.asarray(kl, dtype=float) + np.log(2.0 * np.sqrt(e_t) / delta) + il(t)
    return _risk(_thiemann_raw(e_t, complexity, np.asarray(lam), np.asarray(r_hat)))


def thiemann_bound_opt(t, kl, delta, r_hat, grid=THIEMANN_GRID) -> RiskBound:
    """thiemann_bound minimized over a lambda grid (legitimate: the bound is uniform in lambda)."""
    _check_delta(delta)
    e_t = np.asarray(eta(t), dtype=float)[..., None]
    complexity = (np.asarray(kl, dtype=float) + np.log(2.0 * np.sqrt(eta(t)) / delta) + il(t))[..., None]
    raw = _thiemann_raw(e_t, complexity, np.asarray(grid), np.asarray(r_hat, dtype=float)[..., None])
    return _risk(raw.min(axis=-1))


def ipm_rhs_stitched(spec: ConvexPhiSpec, t, gamma, delta):
    """convex_phi_rhs_stitched with an IPM value gamma in place of the KL term.

    ``gamma`` must bound E_rho h - E_nu h for the centred functions
    h = lambda_eta phi_t - ln E exp(lambda_eta phi_eta), e.g. the oscillation
    of h over the parameters times TV(rho, nu).
    """
    if np.any(np.asarray(gamma) < 0):
        raise ConfigError("IPM value gamma must be nonnegative")
    return convex_phi_rhs_stitched(spec, t, gamma, delta)


def ipm_rhs_target(spec: ConvexPhiSpec, n: int, t, gamma, delta):
    if np.any(np.asarray(gamma) < 0):
        raise ConfigError("IPM value gamma must be nonnegative")
    return convex_phi_rhs_target(spec, n, t, gamma, delta)


def renyi_convex_rhs(t, alpha: float, d_alpha, moment_oracle: Callable[[int], float], delta):
    """Bound on ln E_rho phi_t through Hoelder with the order-alpha Renyi divergence.

    ``moment_oracle(j)`` returns ln E_nu E[phi_j^(alpha / (alpha - 1))].
    """
    _check_delta(delta)
    if not alpha > 1:
        raise ConfigError("Renyi order must exceed 1")
    t = np.asarray(t)
    e_t = np.asarray(eta(t))
    uniq, inv = np.unique(e_t, return_inverse=True)
    moments = np.array([moment_oracle(int(j)) for j in uniq], dtype=float)[inv.reshape(e_t.shape)]
    return _scalar((alpha - 1.0) / alpha * (np.asarray(d_alpha, dtype=float) + moments - log(delta) + il(t)))


def renyi_convex_rhs_target(n: int, alpha: float, d_alpha, moment: float, delta):
    _check_delta(delta)
    if not alpha > 1:
        raise ConfigError("Renyi order must exceed 1")
    return _scalar((alpha - 1.0) / alpha * (np.asarray(d_alpha, dtype=float) + moment - log(delta)))
