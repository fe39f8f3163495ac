"""Synthetic loss streams over a finite parameter set, with exact oracle moments.

Every scenario draws one datum Z_t per step, shared by all parameters, and
maps it to a loss per parameter.  Oracle quantities are conditional on the
past and given in closed form (or by one-off quadrature), never estimated.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats

from ..exceptions import ConfigError

SCENARIO_KINDS = (
    "bernoulli_iid",
    "uniform_bounded",
    "gaussian",
    "pareto_heavy",
    "sampling_without_replacement",
    "mds_bounded",
)


@dataclass
class Stream:
    """One realised trajectory; attribute names match StepObservation."""

    loss: np.ndarray  # (T, K)
    mean: np.ndarray  # (T, K), E[f_t | past]
    variance: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None
    sigma_sub: Optional[np.ndarray] = None
    H: Optional[float] = None
    c: Optional[float] = None
    kappa: Optional[np.ndarray] = None
    p: Optional[float] = None
    log_mgf: Optional[Callable] = None


class Scenario:
    """Base class.  Subclasses set the oracle capabilities and implement draw()."""

    kind = ""
    exchangeable = True
    unit_interval = True
    discrete_law = False
    # oracle fields a Stream carries (None-valued fields are absent)
    fields: frozenset = frozenset()

    def __init__(self, params, horizon: int, moment_p: float = 1.5):
        self.params = np.asarray(params, dtype=float)
        self.horizon = int(horizon)
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 1.0 < moment_p <= 2.0:
            raise ConfigError("moment_p must lie in (1, 2]")
        self.moment_p = float(moment_p)

    @property
    def theta_count(self) -> int:
        return self.params.shape[0]

    # scalar constants known before sampling
    H: Optional[float] = None
    c: Optional[float] = None
    sigma_bound: Optional[float] = None

    @property
    def risk(self) -> np.ndarray:
        """Stationary risk R(theta) targeted by the reverse bounds."""
        raise ConfigError(f"{self.kind} has no stationary risk")

    def sample_mean_law(self, n: int):
        """Exact law of the size-n sample mean: support (n+1,), pmf (K, n+1)."""
        raise ConfigError(f"{self.kind} has no discrete sample-mean law")

    def draw(self, rng: np.random.Generator) -> Stream:
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


def _bernoulli_kappa(q, p):
    return q * (1.0 - q) ** p + (1.0 - q) * q**p


def _bernoulli_log_mgf(q):
    def log_mgf(lam):
        return np.log1p(q * np.expm1(lam))

    return log_mgf


class BernoulliIID(Scenario):
    """f(Z, theta) = 1{Z < p_theta} with Z uniform."""

    kind = "bernoulli_iid"
    discrete_law = True
    fields = frozenset({"mean", "variance", "second_moment", "sigma_sub", "H", "c", "kappa", "p", "log_mgf"})
    H = 1.0
    c = 1.0 / 3.0
    sigma_bound = 0.5

    def __init__(self, params, horizon, moment_p=1.5):
        super().__init__(params, horizon, moment_p)
        if self.params.ndim != 1 or np.any(self.params < 0) or np.any(self.params > 1):
            raise ConfigError("bernoulli_iid needs probabilities in [0, 1]")

    @property
    def risk(self):
        return self.params

    def sample_mean_law(self, n):
        k = np.arange(n + 1)
        return k / n, stats.binom.pmf(k[None, :], n, self.params[:, None])

    def draw(self, rng):
        z = rng.random(self.horizon)
        q = self.params[None, :]
        loss = (z[:, None] < q).astype(float)
        shape = loss.shape
        var = np.broadcast_to(q * (1.0 - q), shape)
        return Stream(
            loss=loss,
            mean=np.broadcast_to(q, shape),
            variance=var,
            second_moment=np.broadcast_to(q, shape),
            sigma_sub=0.5,
            H=self.H,
            c=self.c,
            kappa=_bernoulli_kappa(self.params, self.moment_p),
            p=self.moment_p,
            log_mgf=_bernoulli_log_mgf(q),
        )


class UniformBounded(Scenario):
    """f(Z, theta) = lo + (hi - lo) Z with Z uniform; params rows are (lo, hi)."""

    kind = "uniform_bounded"
    fields = frozenset({"mean", "variance", "second_moment", "sigma_sub", "H", "c", "kappa", "p", "log_mgf"})
    H = 1.0

    def __init__(self, params, horizon, moment_p=1.5):
        super().__init__(params, horizon, moment_p)
        pr = self.params
        if pr.ndim != 2 or pr.shape[1] != 2 or np.any(pr[:, 0] < 0) or np.any(pr[:, 1] > 1) or np.any(pr[:, 1] <= pr[:, 0]):
            raise ConfigError("uniform_bounded needs ranges lo:hi with 0 <= lo < hi <= 1")
        self.width = pr[:, 1] - pr[:, 0]
        self.c = float(self.width.max() / 6.0)
        self.sigma_bound = float(self.width.max() / 2.0)

    @property
    def risk(self):
        return self.params.mean(axis=1)

    def draw(self, rng):
        z = rng.random(self.horizon)
        lo, w = self.params[:, 0], self.width
        loss = lo[None, :] + w[None, :] * z[:, None]
        shape = loss.shape
        mean = np.broadcast_to(lo + w / 2.0, shape)
        var = np.broadcast_to(w**2 / 12.0, shape)

        def log_mgf(lam):
            x = lam * w
            safe = np.where(x == 0, 1.0, x)
            return lam * lo + np.where(x == 0, 0.0, np.log(np.expm1(safe) / safe))

        p = self.moment_p
        return Stream(
            loss=loss,
            mean=mean,
            variance=var,
            second_moment=var + mean**2,
            sigma_sub=w / 2.0,
            H=self.H,
            c=self.c,
            kappa=(w / 2.0) ** p / (p + 1.0),
            p=p,
            log_mgf=log_mgf,
        )


class RectifiedGaussian(Scenario):
    """f(Z, theta) = max(0, mu + sigma Z) with Z standard normal; rows are (mu, sigma)."""

    kind = "gaussian"
    unit_interval = False
    fields = frozenset({"mean", "variance", "second_moment", "sigma_sub", "log_mgf"})

    def __init__(self, params, horizon, moment_p=1.5):
        super().__init__(params, horizon, moment_p)
        pr = self.params
        if pr.ndim != 2 or pr.shape[1] != 2 or np.any(pr[:, 1] <= 0):
            raise ConfigError("gaussian needs rows mu:sigma with sigma > 0")
        mu, sd = pr[:, 0], pr[:, 1]
        a = mu / sd
        self._m1 = mu * stats.norm.cdf(a) + sd * stats.norm.pdf(a)
        self._m2 = (mu**2 + sd**2) * stats.norm.cdf(a) + mu * sd * stats.norm.pdf(a)
        # a 1-Lipschitz map of N(mu, sigma^2) is sigma-sub-Gaussian
        self.sigma_bound = float(sd.max())

    @property
    def risk(self):
        return self._m1

    def draw(self, rng):
        z = rng.standard_normal(self.horizon)
        mu, sd = self.params[:, 0], self.params[:, 1]
        loss = np.maximum(0.0, mu[None, :] + sd[None, :] * z[:, None])
        shape = loss.shape

        def log_mgf(lam):
            a = mu / sd
            tail = stats.norm.logcdf(a + lam * sd) + lam * mu + 0.5 * (lam * sd) ** 2
            return np.logaddexp(stats.norm.logcdf(-a), tail)

        return Stream(
            loss=loss,
            mean=np.broadcast_to(self._m1, shape),
            variance=np.broadcast_to(self._m2 - self._m1**2, shape),
            second_moment=np.broadcast_to(self._m2, shape),
            sigma_sub=sd,
            log_mgf=log_mgf,
        )


@lru_cache(maxsize=64)
def _lomax_central_moment(shape: float, p: float) -> float:
    """E|Z - E Z|^p for Z ~ Lomax(shape), by quadrature."""
    m = 1.0 / (shape - 1.0)
    pdf = stats.lomax(shape).pdf
    left, _ = integrate.quad(lambda z: (m - z) ** p * pdf(z), 0.0, m)
    right, _ = integrate.quad(lambda z: (z - m) ** p * pdf(z), m, np.inf)
    return left + right


class ParetoHeavy(Scenario):
    """f(Z, theta) = s_theta Z with Z ~ Lomax(shape): heavy right tail, unbounded."""

    kind = "pareto_heavy"
    unit_interval = False
    fields = frozenset({"mean", "variance", "second_moment", "kappa", "p"})

    def __init__(self, params, horizon, moment_p=1.5, shape=3.0):
        super().__init__(params, horizon, moment_p)
        if self.params.ndim != 1 or np.any(self.params <= 0):
            raise ConfigError("pareto_heavy needs positive scales")
        if not shape > 2.0:
            raise ConfigError("pareto_heavy needs shape > 2 so the second moment exists")
        self.shape = float(shape)

    @property
    def risk(self):
        return self.params / (self.shape - 1.0)

    def draw(self, rng):
        u = rng.random(self.horizon)
        a = self.shape
        z = (1.0 - u) ** (-1.0 / a) - 1.0
        s = self.params[None, :]
        loss = s * z[:, None]
        shape = loss.shape
        m2 = 2.0 / ((a - 1.0) * (a - 2.0))
        mean = np.broadcast_to(s / (a - 1.0), shape)
        var = np.broadcast_to(s**2 * (m2 - 1.0 / (a - 1.0) ** 2), shape)
        kappa = self.params**self.moment_p * _lomax_central_moment(a, self.moment_p)
        return Stream(
            loss=loss,
            mean=mean,
            variance=var,
            second_moment=np.broadcast_to(s**2 * m2, shape),
            kappa=kappa,
            p=self.moment_p,
        )


class Urn(Scenario):
    """Draws without replacement from an urn of N items; item i has loss 1{i < m_theta}.

    params are the fractions m_theta / N.  Exchangeable but not independent.
    """

    kind = "sampling_without_replacement"
    discrete_law = True
    fields = frozenset({"mean", "variance", "second_moment", "sigma_sub", "H", "c", "kappa", "p", "log_mgf"})
    H = 1.0
    c = 1.0 / 3.0
    sigma_bound = 0.5

    def __init__(self, params, horizon, moment_p=1.5, urn_size=None):
        super().__init__(params, horizon, moment_p)
        self.urn_size = int(urn_size or 2 * self.horizon)
        if self.urn_size < self.horizon:
            raise ConfigError("urn must hold at least horizon items")
        if self.params.ndim != 1 or np.any(self.params < 0) or np.any(self.params > 1):
            raise ConfigError("urn fractions must lie in [0, 1]")
        self.ones = np.round(self.params * self.urn_size).astype(np.int64)

    @property
    def risk(self):
        return self.ones / self.urn_size

    def sample_mean_law(self, n):
        k = np.arange(n + 1)
        return k / n, stats.hypergeom.pmf(k[None, :], self.urn_size, self.ones[:, None], n)

    def draw(self, rng):
        items = rng.permutation(self.urn_size)[: self.horizon]
        loss = (items[:, None] < self.ones[None, :]).astype(float)
        drawn_before = np.vstack([np.zeros((1, self.theta_count)), np.cumsum(loss, axis=0)[:-1]])
        remaining = self.urn_size - np.arange(self.horizon)[:, None]
        q = (self.ones[None, :] - drawn_before) / remaining
        return Stream(
            loss=loss,
            mean=q,
            variance=q * (1.0 - q),
            second_moment=q,
            sigma_sub=0.5,
            H=self.H,
            c=self.c,
            kappa=_bernoulli_kappa(q, self.moment_p),
            p=self.moment_p,
            log_mgf=_bernoulli_log_mgf(q),
        )


class MDSBounded(Scenario):
    """Loss 1 - F_t(theta), F_t = a_t(theta) eps_t with Rademacher eps_t.

    The scale a_t(theta) = s_theta (1 + 1{eps_(t-1) = +1}) / 2 is predictable,
    so F is a bounded martingale difference sequence that is not i.i.d.
    """

    kind = "mds_bounded"
    exchangeable = False
    unit_interval = False
    fields = frozenset({"mean", "variance", "second_moment", "sigma_sub", "H", "c", "kappa", "p", "log_mgf"})
    H = 2.0

    def __init__(self, params, horizon, moment_p=1.5):
        super().__init__(params, horizon, moment_p)
        if self.params.ndim != 1 or np.any(self.params <= 0) or np.any(self.params > 1):
            raise ConfigError("mds_bounded needs scales in (0, 1]")
        self.c = float(self.params.max() / 3.0)
        self.sigma_bound = float(self.params.max())

    def draw(self, rng):
        eps = np.where(rng.random(self.horizon) < 0.5, -1.0, 1.0)
        prev_up = np.concatenate([[1.0], (eps[:-1] > 0).astype(float)])
        a = self.params[None, :] * (1.0 + prev_up[:, None]) / 2.0
        loss = 1.0 - a * eps[:, None]
        shape = loss.shape

        def log_mgf(lam):
            return lam + np.log(np.cosh(lam * a))

        return Stream(
            loss=loss,
            mean=np.ones(shape),
            variance=a**2,
            second_moment=1.0 + a**2,
            sigma_sub=a,
            H=self.H,
            c=self.c,
            kappa=a**self.moment_p,
            p=self.moment_p,
            log_mgf=log_mgf,
        )


_REGISTRY = {
    "bernoulli_iid": BernoulliIID,
    "uniform_bounded": UniformBounded,
    "gaussian": RectifiedGaussian,
    "pareto_heavy": ParetoHeavy,
    "sampling_without_replacement": Urn,
    "mds_bounded": MDSBounded,
}


def make_scenario(kind: str, params, horizon: int, **options) -> Scenario:
    if kind not in _REGISTRY:
        raise ConfigError(f"unknown scenario kind {kind!r}; choose from {', '.join(SCENARIO_KINDS)}")
    try:
        return _REGISTRY[kind](params, horizon, **options)
    except TypeError as exc:
        raise ConfigError(f"bad option for {kind}: {exc}") from None
