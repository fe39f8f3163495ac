"""Evaluate every bound kind along a whole trajectory, vectorised over time.

Each evaluator is built once per experiment (compatibility checks, oracle
tables) and then maps a realised stream plus the posterior path to per-t
(lhs, rhs) arrays; the bound is violated at t when lhs > rhs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import log
from typing import Mapping, Optional

import numpy as np
from scipy.special import logsumexp

from .. import reverse
from ..confseq import default_lambda_schedule, stitched_cs_width, subgaussian_cs
from ..divergences import klsf, renyi_rows
from ..exceptions import ConfigError
from ..forward import REQUIRED_FIELDS, BoundKind, LambdaSchedule, check_cap, gaussian_mixture_rhs, step_increments
from ..stitching import epochs_up_to, eta, log_xi
from .scenarios import Scenario, Stream

FORWARD_KINDS = tuple(k.value for k in BoundKind)
REVERSE_KINDS = ("seeger", "mcallester", "thiemann", "convex_phi", "ipm_tv", "renyi")
CS_KINDS = ("cs_subgaussian", "cs_stitched")
ALL_KINDS = FORWARD_KINDS + REVERSE_KINDS + CS_KINDS


@dataclass(frozen=True)
class BoundSpec:
    """A named bound to track: kind, weight schedule and kind-specific options."""

    name: str
    kind: str
    schedule: Optional[LambdaSchedule] = None
    options: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown bound kind {self.kind!r}")


@dataclass
class RepData:
    """One replication: stream plus posterior path, with shared derived arrays."""

    stream: Stream
    rho: np.ndarray  # (T, K)
    kl: np.ndarray  # (T,)
    prior: np.ndarray  # (K,)
    t: np.ndarray  # (T,) as float

    @cached_property
    def r_hat(self):
        return np.cumsum(self.stream.loss, axis=0) / self.t[:, None]

    @cached_property
    def tv(self):
        return 0.5 * np.abs(self.rho - self.prior[None, :]).sum(axis=1)

    def avg(self, x):
        """Posterior average per row."""
        return np.einsum("tk,tk->t", self.rho, np.broadcast_to(x, self.rho.shape))


class Evaluator:
    allowed_options: tuple = ()

    def __init__(self, spec: BoundSpec, scenario: Scenario, delta: float, horizon: int, prior: np.ndarray):
        unknown = set(spec.options) - set(self.allowed_options)
        if unknown:
            raise ConfigError(f"bound {spec.name!r}: unknown options {sorted(unknown)}")
        self.spec = spec
        self.scenario = scenario
        self.delta = delta
        self.horizon = horizon
        self.prior = prior
        self.t = np.arange(1, horizon + 1)

    def opt(self, key, default=None):
        return self.spec.options.get(key, default)

    def evaluate(self, rep: RepData):
        raise NotImplementedError


class ForwardEvaluator(Evaluator):
    allowed_options = ("bennett_proxy", "simplified", "beta", "short_form", "split_delta")

    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        self.kind = BoundKind(spec.kind)
        missing = [f for f in REQUIRED_FIELDS[self.kind] if f not in scenario.fields]
        if missing:
            raise ConfigError(f"bound {spec.name!r} ({spec.kind}) needs {missing}, which {scenario.kind} does not provide")
        if self.kind == BoundKind.GAUSSIAN_MIXTURE:
            self.lam = np.ones(horizon)
        else:
            if spec.schedule is None:
                raise ConfigError(f"bound {spec.name!r} needs a lambda schedule")
            self.lam = spec.schedule.values(horizon)
            check_cap(self.kind, self.lam, scenario.H, scenario.c)
        beta = self.opt("beta")
        self.beta = None if beta in (None, "sweep") else float(beta)

    def evaluate(self, rep):
        kw = {"bennett_proxy": self.opt("bennett_proxy", "variance"), "simplified": bool(self.opt("simplified", False))}
        lhs_inc, rhs_inc = step_increments(self.kind, self.lam[:, None], rep.stream, **kw)
        lhs = rep.avg(np.cumsum(lhs_inc, axis=0))
        if self.kind == BoundKind.GAUSSIAN_MIXTURE:
            var = np.cumsum(rhs_inc, axis=0).max(axis=1)
            rhs = gaussian_mixture_rhs(
                var, self.beta, rep.kl, self.delta,
                short_form=bool(self.opt("short_form", False)),
                split_delta=bool(self.opt("split_delta", True)),
            )
            # the mixture bound is two-sided
            return np.abs(lhs), rhs
        rhs = rep.avg(np.cumsum(rhs_inc, axis=0)) + rep.kl + log(1.0 / self.delta)
        return lhs, rhs


class ReverseEvaluator(Evaluator):
    allowed_options = ("target_n",)
    needs_discrete_law = False

    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        if not (scenario.unit_interval and scenario.exchangeable):
            raise ConfigError(f"bound {spec.name!r} needs exchangeable losses in [0, 1]; {scenario.kind} is not")
        if self.needs_discrete_law and not scenario.discrete_law:
            raise ConfigError(f"bound {spec.name!r} needs an exact discrete loss law; {scenario.kind} has none")
        n = self.opt("target_n")
        self.target_n = None if n is None else int(n)
        if self.target_n is not None and not 1 <= self.target_n <= horizon:
            raise ConfigError(f"bound {spec.name!r}: target_n must lie in [1, horizon]")
        self.risk = scenario.risk

    def after_target(self, rhs):
        """Target-time bounds say nothing before n."""
        if self.target_n is None:
            return rhs
        return np.where(self.t >= self.target_n, rhs, np.inf)


class SeegerEvaluator(ReverseEvaluator):
    def evaluate(self, rep):
        lhs = rep.avg(klsf(rep.r_hat, self.risk[None, :]))
        if self.target_n is None:
            return lhs, reverse.seeger_rhs(self.t, rep.kl, self.delta)
        return lhs, self.after_target(reverse.seeger_rhs_target(self.target_n, rep.kl, self.delta))


class McAllesterEvaluator(ReverseEvaluator):
    def evaluate(self, rep):
        lhs = rep.avg(self.risk)
        r_hat = rep.avg(rep.r_hat)
        if self.target_n is None:
            return lhs, reverse.mcallester_bound(self.t, rep.kl, self.delta, r_hat).value
        return lhs, self.after_target(reverse.mcallester_bound_target(self.target_n, rep.kl, self.delta, r_hat).value)


class ThiemannEvaluator(ReverseEvaluator):
    allowed_options = ()

    def evaluate(self, rep):
        lhs = rep.avg(self.risk)
        return lhs, reverse.thiemann_bound_opt(self.t, rep.kl, self.delta, rep.avg(rep.r_hat)).value


def _phi_from_options(name: str, catoni_c: float):
    if name == "kl":
        return klsf
    if name == "quadratic":
        return reverse.quadratic_phi
    if name == "catoni":
        return reverse.catoni_phi(catoni_c)
    raise ConfigError(f"unknown phi {name!r}; choose kl, quadratic or catoni")


def _exact_expectation(scenario: Scenario, n: int, fn):
    """E fn(R_hat_n, R) per parameter under the exact law of the sample mean."""
    support, pmf = scenario.sample_mean_law(n)
    vals = fn(support[None, :], scenario.risk[:, None])
    return np.sum(np.where(pmf > 0, pmf * np.where(pmf > 0, vals, 0.0), 0.0), axis=1)


def _exact_log_mgf(scenario: Scenario, n: int, phi, lam: float):
    support, pmf = scenario.sample_mean_law(n)
    with np.errstate(divide="ignore"):
        log_pmf = np.log(pmf)
    vals = lam * phi(support[None, :], scenario.risk[:, None])
    return logsumexp(np.where(pmf > 0, vals + log_pmf, -np.inf), axis=1)


class ConvexPhiEvaluator(ReverseEvaluator):
    """General convex phi with its exact per-parameter log-MGF table.

    The MGF term is ln E_rho E exp(lam phi_eta), mixing per-parameter tables
    under the current posterior.
    """

    allowed_options = ("target_n", "phi", "catoni_c", "lambda_scale")
    needs_discrete_law = True

    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        self.phi = _phi_from_options(self.opt("phi", "kl"), float(self.opt("catoni_c", 1.0)))
        scale = float(self.opt("lambda_scale", 1.0))
        if not scale > 0:
            raise ConfigError("lambda_scale must be positive")
        starts = [self.target_n] if self.target_n is not None else epochs_up_to(horizon)
        self.lam = {j: scale * j for j in starts}
        self.table = {j: _exact_log_mgf(scenario, j, self.phi, self.lam[j]) for j in starts}
        idx = np.full(horizon, self.target_n) if self.target_n is not None else eta(self.t)
        self.table_t = np.stack([self.table[int(j)] for j in idx])
        self.lam_t = np.array([self.lam[int(j)] for j in idx])

    def evaluate(self, rep):
        lhs = rep.avg(self.phi(rep.r_hat, self.risk[None, :]))
        mgf = np.log(rep.avg(np.exp(self.table_t)))
        if self.target_n is None:
            return lhs, reverse.convex_phi_rhs_from_mgf(mgf, self.lam_t, self.t, rep.kl, self.delta)
        return lhs, self.after_target((mgf + rep.kl + log(1.0 / self.delta)) / self.lam_t)


class IPMTVEvaluator(ReverseEvaluator):
    """phi = klsf with lambda_j = j, the KL term replaced by an oscillation-times-TV value.

    Centring h = lam klsf_t - ln xi(lam) with the distribution-free ln xi keeps
    E exp(h) <= 1, and E_rho h - E_nu h <= lam osc_theta(klsf_t) TV(rho, nu).
    """

    def evaluate(self, rep):
        phi = klsf(rep.r_hat, self.risk[None, :])
        lhs = rep.avg(phi)
        osc = phi.max(axis=1) - phi.min(axis=1)
        spec = reverse.maurer_spec()
        if self.target_n is None:
            gamma = eta(self.t) * osc * rep.tv
            return lhs, reverse.ipm_rhs_stitched(spec, self.t, gamma, self.delta)
        gamma = self.target_n * osc * rep.tv
        rhs = (log_xi(self.target_n) + gamma + log(1.0 / self.delta)) / self.target_n
        return lhs, self.after_target(rhs)


class RenyiEvaluator(ReverseEvaluator):
    """ln E_rho klsf_t against the order-alpha Renyi bound with exact prior moments."""

    allowed_options = ("target_n", "alpha")
    needs_discrete_law = True

    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        self.alpha = float(self.opt("alpha", 2.0))
        if not self.alpha > 1:
            raise ConfigError("Renyi order must exceed 1")
        power = self.alpha / (self.alpha - 1.0)
        starts = [self.target_n] if self.target_n is not None else epochs_up_to(horizon)
        # a deterministic stream has zero moment; ln 0 = -inf then matches the -inf lhs
        with np.errstate(divide="ignore"):
            self.moment = {
                j: float(np.log(prior @ _exact_expectation(scenario, j, lambda x, y: klsf(x, y) ** power)))
                for j in starts
            }

    def evaluate(self, rep):
        with np.errstate(divide="ignore"):
            lhs = np.log(rep.avg(klsf(rep.r_hat, self.risk[None, :])))
        d = renyi_rows(rep.rho, self.prior, self.alpha)
        if self.target_n is None:
            return lhs, reverse.renyi_convex_rhs(self.t, self.alpha, d, self.moment.__getitem__, self.delta)
        rhs = reverse.renyi_convex_rhs_target(self.target_n, self.alpha, d, self.moment[self.target_n], self.delta)
        return lhs, self.after_target(rhs)


class CSEvaluator(Evaluator):
    """Two-sided sequence for the posterior average of the (weighted) conditional means."""

    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        if scenario.sigma_bound is None:
            raise ConfigError(f"bound {spec.name!r} needs sub-Gaussian losses; {scenario.kind} is not")
        self.sigma = scenario.sigma_bound


class SubGaussianCSEvaluator(CSEvaluator):
    def __init__(self, spec, scenario, delta, horizon, prior):
        super().__init__(spec, scenario, delta, horizon, prior)
        self.schedule = spec.schedule or default_lambda_schedule(delta, self.sigma)
        self.lam = self.schedule.values(horizon)

    def evaluate(self, rep):
        s = rep.stream
        weighted = rep.avg(np.cumsum(self.lam[:, None] * s.loss, axis=0))
        cs = subgaussian_cs(weighted, self.t, self.schedule, self.sigma, rep.kl, self.delta)
        lam_sum = np.cumsum(self.lam)
        target = rep.avg(np.cumsum(self.lam[:, None] * s.mean, axis=0)) / lam_sum
        return np.abs(target - cs.center), cs.width


class StitchedCSEvaluator(CSEvaluator):
    def evaluate(self, rep):
        center = rep.avg(rep.r_hat)
        target = rep.avg(np.cumsum(rep.stream.mean, axis=0) / rep.t[:, None])
        return np.abs(target - center), stitched_cs_width(self.t, rep.kl, self.delta, self.sigma)


_EVALUATORS = {
    "seeger": SeegerEvaluator,
    "mcallester": McAllesterEvaluator,
    "thiemann": ThiemannEvaluator,
    "convex_phi": ConvexPhiEvaluator,
    "ipm_tv": IPMTVEvaluator,
    "renyi": RenyiEvaluator,
    "cs_subgaussian": SubGaussianCSEvaluator,
    "cs_stitched": StitchedCSEvaluator,
}


def make_evaluator(spec: BoundSpec, scenario: Scenario, delta: float, horizon: int, prior: np.ndarray) -> Evaluator:
    cls = ForwardEvaluator if spec.kind in FORWARD_KINDS else _EVALUATORS[spec.kind]
    return cls(spec, scenario, delta, horizon, prior)
