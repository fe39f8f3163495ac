"""Time-uniform bounds from nonnegative supermartingales, as per-step accumulators.

A state keeps, for every parameter in a finite set, the running sum of the
left-hand process (weighted deviations) and of the compensator that the
supermartingale subtracts.  The divergence term is added only at query time,
so the same state serves any posterior.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import e, log
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .divergences import FiniteMixture, kl_divergence
from .exceptions import ConfigError


class BoundKind(str, Enum):
    SUBGAUSSIAN = "subgaussian"
    GAUSSIAN_MIXTURE = "gaussian_mixture"
    BERNSTEIN_BOUNDED = "bernstein_bounded"
    BENNETT = "bennett"
    BERNSTEIN_CONDITION = "bernstein_condition"
    BOUNDED_MGF = "bounded_mgf"
    SECOND_MOMENT = "second_moment"
    BERCU_TOUATI = "bercu_touati"
    PTH_MOMENT = "pth_moment"


# oracle fields each kind reads from an observation
REQUIRED_FIELDS = {
    BoundKind.SUBGAUSSIAN: ("mean", "sigma_sub"),
    BoundKind.GAUSSIAN_MIXTURE: ("mean", "sigma_sub"),
    BoundKind.BERNSTEIN_BOUNDED: ("mean", "variance", "H"),
    BoundKind.BENNETT: ("mean", "variance", "H"),
    BoundKind.BERNSTEIN_CONDITION: ("mean", "variance", "c"),
    BoundKind.BOUNDED_MGF: ("log_mgf",),
    BoundKind.SECOND_MOMENT: ("mean", "second_moment"),
    BoundKind.BERCU_TOUATI: ("mean", "variance"),
    BoundKind.PTH_MOMENT: ("mean", "kappa", "p"),
}

NONNEGATIVE_LOSS_KINDS = (BoundKind.BOUNDED_MGF, BoundKind.SECOND_MOMENT, BoundKind.BENNETT)


@dataclass(frozen=True)
class LambdaSchedule:
    """Predictable sequence of nonnegative weights lambda_1, lambda_2, ..."""

    kind: str
    lam: float = 0.0
    n: int = 1
    c: float = 0.0
    explicit: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "target", "sqrt_log", "explicit"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "target" and self.n < 1:
            raise ConfigError("target schedule needs n >= 1")
        if self.lam < 0 or self.c < 0 or any(v < 0 for v in self.explicit):
            raise ConfigError("schedule values must be nonnegative")
        object.__setattr__(self, "explicit", tuple(float(v) for v in self.explicit))

    @classmethod
    def constant(cls, lam):
        return cls("constant", lam=float(lam))

    @classmethod
    def target(cls, lam, n):
        return cls("target", lam=float(lam), n=int(n))

    @classmethod
    def sqrt_log(cls, c):
        return cls("sqrt_log", c=float(c))

    @classmethod
    def from_values(cls, values: Sequence[float]):
        return cls("explicit", explicit=tuple(values))

    def values(self, horizon: int) -> np.ndarray:
        """lambda_t for t = 1..horizon."""
        if self.kind == "explicit" and horizon > len(self.explicit):
            raise ConfigError(f"explicit schedule has {len(self.explicit)} values, need {horizon}")
        return self._at_times(np.arange(1, horizon + 1))

    def _at_times(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t)
        if self.kind == "constant":
            return np.full(t.shape, self.lam)
        if self.kind == "target":
            return np.full(t.shape, self.lam / self.n)
        if self.kind == "sqrt_log":
            tf = t.astype(float)
            return self.c / np.sqrt(tf * np.log(tf + 1.0))
        return np.array(self.explicit)[t - 1]

    def at(self, t: int) -> float:
        if t < 1:
            raise ValueError("schedules are indexed from t = 1")
        if self.kind == "explicit" and t > len(self.explicit):
            raise ConfigError(f"explicit schedule has only {len(self.explicit)} values")
        return float(self._at_times(np.array([t]))[0])

    def partial_sums(self, horizon: int):
        """Running sums of lambda and lambda**2 up to each t."""
        lam = self.values(horizon)
        return np.cumsum(lam), np.cumsum(lam**2)


@dataclass
class StepObservation:
    """Losses at one step for every parameter, plus the oracle quantities.

    ``variance`` is E[Delta^2 | past] and ``second_moment`` is E[f^2 | past];
    if only one is given the other follows from ``mean``.  ``log_mgf`` maps
    lambda to ln E[exp(lambda f) | past] per parameter.
    """

    loss: np.ndarray
    mean: Optional[np.ndarray] = None
    variance: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None
    sigma_sub: Optional[Union[float, np.ndarray]] = None
    H: Optional[float] = None
    c: Optional[float] = None
    kappa: Optional[Union[float, np.ndarray]] = None
    p: Optional[float] = None
    log_mgf: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        self.loss = np.atleast_1d(np.asarray(self.loss, dtype=float))
        for name in ("mean", "variance", "second_moment"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, np.broadcast_to(np.asarray(val, dtype=float), self.loss.shape))
        if self.mean is not None:
            if self.variance is None and self.second_moment is not None:
                self.variance = np.maximum(self.second_moment - self.mean**2, 0.0)
            elif self.second_moment is None and self.variance is not None:
                self.second_moment = self.variance + self.mean**2


def zeta_p(x, p: float):
    """Influence function: x for x <= 0, ln(1 + x + x^p / p) for x > 0."""
    x = np.asarray(x, dtype=float)
    pos = np.maximum(x, 0.0)
    return np.where(x <= 0, x, np.log1p(pos + pos**p / p))


def psi_poisson(x):
    """exp(x) - x - 1."""
    return np.expm1(x) - x


def check_cap(kind: BoundKind, lam, H=None, c=None):
    """Reject weights above the range a kind's supermartingale tolerates."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ConfigError("lambda must be finite and nonnegative")
    if kind == BoundKind.BERNSTEIN_BOUNDED and np.any(lam * H > 1.0 + 1e-12):
        raise ConfigError(f"bernstein_bounded needs lambda <= 1/H = {1.0 / H!r}")
    if kind == BoundKind.BERNSTEIN_CONDITION and np.any(lam * c >= 1.0):
        raise ConfigError(f"bernstein_condition needs lambda < 1/c = {1.0 / c!r}")
    if kind == BoundKind.SUBGAUSSIAN and c is not None and np.any(lam * c > 1.0 + 1e-12):
        raise ConfigError(f"subexponential weights need lambda <= 1/c = {1.0 / c!r}")


def step_increments(kind: BoundKind, lam, obs, *, bennett_proxy="variance", simplified=False):
    """Per-parameter increments (lhs, rhs) of one or many steps.

    Shape-agnostic: ``lam`` broadcasts against the loss array, so a (T, 1)
    weight column with (T, K) oracle arrays yields (T, K) increments.
    ``obs`` is anything with the StepObservation attributes.
    """
    kind = BoundKind(kind)
    lam = np.asarray(lam, dtype=float)
    loss = obs.loss
    mean = obs.mean
    delta_ = None if mean is None else mean - loss
    if kind == BoundKind.SUBGAUSSIAN:
        return lam * delta_, np.broadcast_to(0.5 * lam**2 * np.asarray(obs.sigma_sub) ** 2, loss.shape)
    if kind == BoundKind.GAUSSIAN_MIXTURE:
        return delta_, np.broadcast_to(np.asarray(obs.sigma_sub, dtype=float) ** 2, loss.shape)
    if kind == BoundKind.BERNSTEIN_BOUNDED:
        return lam * delta_, (e - 2.0) * lam**2 * obs.variance
    if kind == BoundKind.BENNETT:
        H = np.asarray(obs.H, dtype=float)
        if bennett_proxy == "variance":
            proxy = obs.variance
        elif bennett_proxy == "squared_mean":
            proxy = mean**2
        else:
            raise ConfigError(f"unknown Bennett variance proxy {bennett_proxy!r}")
        return lam * delta_, proxy / H**2 * psi_poisson(lam * H)
    if kind == BoundKind.BERNSTEIN_CONDITION:
        c = np.asarray(obs.c, dtype=float)
        return lam * delta_, lam**2 * obs.variance / (2.0 * (1.0 - c * lam))
    if kind == BoundKind.BOUNDED_MGF:
        lm = obs.log_mgf(lam) if callable(obs.log_mgf) else np.asarray(obs.log_mgf, dtype=float)
        return lam * loss, np.broadcast_to(lm, loss.shape)
    if kind == BoundKind.SECOND_MOMENT:
        return lam * delta_, 0.5 * lam**2 * obs.second_moment
    if kind == BoundKind.BERCU_TOUATI:
        if simplified:
            return lam * delta_, lam**2 / 6.0 * (loss**2 + 2.0 * obs.second_moment)
        return lam * delta_, lam**2 / 6.0 * (delta_**2 + 2.0 * obs.variance)
    if kind == BoundKind.PTH_MOMENT:
        p = float(obs.p)
        rhs = np.log1p(lam**p * np.asarray(obs.kappa, dtype=float) / p)
        return zeta_p(lam * delta_, p), np.broadcast_to(rhs, loss.shape)
    raise ConfigError(f"unhandled bound kind {kind!r}")


def validate_observation(kind: BoundKind, obs, lam):
    for name in REQUIRED_FIELDS[kind]:
        if getattr(obs, name) is None:
            raise ConfigError(f"{kind.value} needs the oracle field {name!r}")
    if kind == BoundKind.BERCU_TOUATI and obs.second_moment is None:
        raise ConfigError("bercu_touati needs second moments for its simplified form")
    if not np.all(np.isfinite(obs.loss)):
        raise ConfigError("losses must be finite")
    if kind in NONNEGATIVE_LOSS_KINDS and np.any(obs.loss < 0):
        raise ConfigError(f"{kind.value} needs nonnegative losses")
    if obs.H is not None and np.any(np.asarray(obs.H) <= 0):
        raise ConfigError("range H must be positive")
    if kind == BoundKind.PTH_MOMENT and not (1.0 < float(obs.p) <= 2.0 and np.all(np.asarray(obs.kappa) > 0)):
        raise ConfigError("pth_moment needs p in (1, 2] and kappa > 0")
    check_cap(kind, lam, obs.H, obs.c)


class _Neumaier:
    """Compensated running sum, elementwise over a vector."""

    def __init__(self, size):
        self.s = np.zeros(size)
        self.comp = np.zeros(size)

    def add(self, x):
        x = np.broadcast_to(np.asarray(x, dtype=float), self.s.shape)
        tot = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.comp += np.where(big, (self.s - tot) + x, (x - tot) + self.s)
        self.s = tot

    @property
    def value(self):
        return self.s + self.comp


@dataclass
class ForwardBoundState:
    kind: BoundKind
    size: int
    bennett_proxy: str = "variance"
    t: int = 0
    _lam: _Neumaier = field(init=False, repr=False)
    _lam_sq: _Neumaier = field(init=False, repr=False)
    _lhs: _Neumaier = field(init=False, repr=False)
    _rhs: _Neumaier = field(init=False, repr=False)
    _rhs_simple: Optional[_Neumaier] = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.kind = BoundKind(self.kind)
        self._lam = _Neumaier(1)
        self._lam_sq = _Neumaier(1)
        self._lhs = _Neumaier(self.size)
        self._rhs = _Neumaier(self.size)
        if self.kind == BoundKind.BERCU_TOUATI:
            self._rhs_simple = _Neumaier(self.size)

    @property
    def lambda_sum(self) -> float:
        return float(self._lam.value[0])

    @property
    def lambda_sq_sum(self) -> float:
        return float(self._lam_sq.value[0])

    @property
    def lhs_per_theta(self) -> np.ndarray:
        return self._lhs.value

    def rhs_per_theta(self, simplified=False) -> np.ndarray:
        if simplified:
            if self._rhs_simple is None:
                raise ConfigError("the simplified form needs bercu_touati with nonnegative losses")
            return self._rhs_simple.value
        return self._rhs.value

    def update(self, schedule: LambdaSchedule, obs: StepObservation) -> "ForwardBoundState":
        """Advance by one step in place and return self."""
        if obs.loss.shape != (self.size,):
            raise ConfigError(f"expected {self.size} losses, got {obs.loss.shape}")
        lam = schedule.at(self.t + 1)
        validate_observation(self.kind, obs, lam)
        lhs, rhs = step_increments(self.kind, lam, obs, bennett_proxy=self.bennett_proxy)
        if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
            raise ConfigError("nonfinite increment; check the oracle inputs")
        if self._rhs_simple is not None and np.any(obs.loss < 0):
            self._rhs_simple = None
        if self._rhs_simple is not None:
            self._rhs_simple.add(step_increments(self.kind, lam, obs, simplified=True)[1])
        self._lam.add(lam)
        self._lam_sq.add(lam**2)
        self._lhs.add(lhs)
        self._rhs.add(rhs)
        self.t += 1
        return self


def update(state: ForwardBoundState, schedule: LambdaSchedule, obs: StepObservation) -> ForwardBoundState:
    return state.update(schedule, obs)


def _weights(posterior) -> np.ndarray:
    return posterior.weights if isinstance(posterior, FiniteMixture) else np.asarray(posterior, dtype=float)


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta!r}")


def rhs(state: ForwardBoundState, posterior, prior, delta: float, *, simplified=False) -> float:
    """Posterior-averaged compensator + KL(posterior||prior) + ln(1/delta)."""
    _check_delta(delta)
    kl = kl_divergence(posterior, prior)
    if state.kind == BoundKind.GAUSSIAN_MIXTURE:
        return gaussian_mixture_rhs(state, None, kl, delta)
    return float(_weights(posterior) @ state.rhs_per_theta(simplified)) + kl + log(1.0 / delta)


def gap_lhs(state: ForwardBoundState, posterior) -> float:
    """Posterior average of the accumulated left-hand process.

    Weighted deviations sum lambda_i (mu_i - f_i) for most kinds, the weighted
    losses for the MGF kind, unweighted deviations for the Gaussian mixture and
    sum zeta_p(lambda_i Delta_i) for the p-th moment kind.
    """
    return float(_weights(posterior) @ state.lhs_per_theta)


DEFAULT_BETAS = tuple(np.geomspace(2.0**-10, 2.0**10, 41))


def gaussian_mixture_rhs(
    state_or_variance,
    beta=None,
    kl: float = 0.0,
    delta: float = 0.05,
    *,
    short_form: bool = False,
    split_delta: bool = True,
):
    """Bound on |sum_i E_rho Delta_i| from a N(0, beta) mixture over lambda.

    With s = 1 + beta * V, V the accumulated variance proxy, the mixture
    supermartingale equals s^(-1/2) exp(beta D^2 / (2 s)); inverting it gives
    sqrt((s / beta) * (ln s + 2 (kl + ln(1/delta)))).  ``short_form=True``
    returns sqrt((s / beta) * (kl + ln(s / delta))) instead, which is smaller
    than the mixture integral allows and carries no guarantee.

    ``beta`` may be a scalar or a grid; the minimum over a grid of m points
    is taken at level delta / m unless ``split_delta`` is False.  Arrays of
    variance sums and kl values broadcast.
    """
    _check_delta(delta)
    if isinstance(state_or_variance, ForwardBoundState):
        # per-parameter proxies may differ; the largest keeps the bound valid for all
        var_sum = float(np.max(state_or_variance.rhs_per_theta()))
    else:
        var_sum = state_or_variance
    var_sum = np.asarray(var_sum, dtype=float)
    betas = np.atleast_1d(np.asarray(DEFAULT_BETAS if beta is None else beta, dtype=float))
    if betas.size == 0:
        raise ConfigError("empty beta sweep")
    if np.any(betas <= 0):
        raise ConfigError("beta must be positive")
    d = delta / betas.size if split_delta else delta
    kl = np.asarray(kl, dtype=float)
    shape = np.broadcast_shapes(var_sum.shape, kl.shape)
    var_sum = np.broadcast_to(var_sum, shape)[..., None]
    kl_b = np.broadcast_to(kl, shape)[..., None]
    s = 1.0 + betas * var_sum
    if short_form:
        vals = np.sqrt(s / betas * (kl_b + np.log(s / d)))
    else:
        vals = np.sqrt(s / betas * (np.log(s) + 2.0 * (kl_b + log(1.0 / d))))
    out = vals.min(axis=-1)
    return float(out) if out.ndim == 0 else out
