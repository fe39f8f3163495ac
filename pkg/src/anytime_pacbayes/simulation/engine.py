"""Seeded trajectories and Monte Carlo coverage of time-uniform bounds."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import sqrt
from typing import Optional

import numpy as np

from ..divergences import FiniteMixture, kl_rows
from ..exceptions import ConfigError
from .bounds import BoundSpec, RepData, make_evaluator
from .scenarios import make_scenario

WORKERS_ENV = "ANYTIME_PACBAYES_WORKERS"


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    params: tuple
    horizon: int
    options: dict = field(default_factory=dict)

    def build(self):
        return make_scenario(self.kind, np.array(self.params, dtype=float), self.horizon, **self.options)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    bounds: tuple
    delta: float = 0.05
    posterior_rule: str = "gibbs"
    lambda_post: float = 1.0
    posterior_weights: Optional[tuple] = None
    prior_weights: Optional[tuple] = None
    reps: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.posterior_rule not in ("gibbs", "fixed"):
            raise ConfigError(f"posterior rule must be gibbs or fixed, got {self.posterior_rule!r}")
        if self.lambda_post < 0:
            raise ConfigError("lambda_post must be nonnegative")
        if not self.bounds:
            raise ConfigError("configure at least one bound")
        names = [b.name for b in self.bounds]
        if len(set(names)) != len(names):
            raise ConfigError("bound names must be unique")


def gibbs_posterior(prior: FiniteMixture, cum_losses, lambda_post: float) -> FiniteMixture:
    """Weights proportional to prior * exp(-lambda_post * cumulative loss)."""
    cum_losses = np.asarray(cum_losses, dtype=float)
    if cum_losses.shape != prior.weights.shape:
        raise ConfigError("one cumulative loss per prior atom is needed")
    if lambda_post < 0:
        raise ConfigError("lambda_post must be nonnegative")
    return FiniteMixture(gibbs_rows(prior.weights, cum_losses[None, :], lambda_post)[0])


def gibbs_rows(prior: np.ndarray, cum_losses: np.ndarray, lambda_post: float) -> np.ndarray:
    """Row-wise Gibbs posteriors for a (T, K) array of cumulative losses, in log domain."""
    with np.errstate(divide="ignore"):
        logw = np.log(prior)[None, :] - lambda_post * cum_losses
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    return w


@dataclass
class Trace:
    """Per-t left and right sides of every bound along one replication."""

    t: np.ndarray
    names: tuple
    lhs: np.ndarray  # (B, T)
    rhs: np.ndarray  # (B, T)
    kl: np.ndarray  # (T,)

    @property
    def violated(self) -> np.ndarray:
        return self.lhs > self.rhs

    @property
    def first_violation(self) -> np.ndarray:
        """First t with lhs > rhs per bound, 0 if never."""
        v = self.violated
        return np.where(v.any(axis=1), v.argmax(axis=1) + 1, 0)


@dataclass
class CoverageReport:
    names: tuple
    kinds: tuple
    scenario: str
    violations: np.ndarray  # (B,) replications with any violation
    reps: int
    horizon: int
    delta: float

    @property
    def violation_rate(self) -> np.ndarray:
        return self.violations / self.reps

    @property
    def std_error(self) -> np.ndarray:
        r = self.violation_rate
        return np.sqrt(r * (1.0 - r) / self.reps)

    @property
    def threshold(self) -> float:
        """delta plus three binomial standard errors at rate delta."""
        return self.delta + 3.0 * sqrt(self.delta * (1.0 - self.delta) / self.reps)


class Experiment:
    """A config with its scenario and evaluators built; checks run before sampling."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.scenario = config.scenario.build()
        k = self.scenario.theta_count
        if config.prior_weights is None:
            self.prior = FiniteMixture.uniform(k)
        else:
            self.prior = FiniteMixture(np.array(config.prior_weights, dtype=float))
        if len(self.prior) != k:
            raise ConfigError(f"prior has {len(self.prior)} atoms but the scenario has {k} parameters")
        self.fixed_rho = None
        if config.posterior_rule == "fixed":
            w = self.prior.weights if config.posterior_weights is None else config.posterior_weights
            self.fixed_rho = FiniteMixture(np.array(w, dtype=float))
            if len(self.fixed_rho) != k:
                raise ConfigError("fixed posterior size does not match the scenario")
        horizon = config.scenario.horizon
        self.evaluators = [
            make_evaluator(b, self.scenario, config.delta, horizon, self.prior.weights) for b in config.bounds
        ]
        self.t = np.arange(1, horizon + 1, dtype=float)

    def rng(self, rep_index: int) -> np.random.Generator:
        """Counter-based stream keyed by (seed, replication)."""
        return np.random.Generator(np.random.Philox(key=[self.config.seed, rep_index]))

    def trajectory(self, rep_index: int) -> Trace:
        stream = self.scenario.draw(self.rng(rep_index))
        nu = self.prior.weights
        if self.fixed_rho is None:
            rho = gibbs_rows(nu, np.cumsum(stream.loss, axis=0), self.config.lambda_post)
        else:
            rho = np.broadcast_to(self.fixed_rho.weights, stream.loss.shape)
        kl = kl_rows(rho, nu)
        rep = RepData(stream=stream, rho=rho, kl=kl, prior=nu, t=self.t)
        sides = [ev.evaluate(rep) for ev in self.evaluators]
        lhs = np.stack([np.broadcast_to(s[0], self.t.shape) for s in sides])
        rhs = np.stack([np.broadcast_to(s[1], self.t.shape) for s in sides])
        return Trace(self.t.astype(np.int64), tuple(b.name for b in self.config.bounds), lhs, rhs, kl)

    def violations(self, rep_indices) -> np.ndarray:
        """(len(rep_indices), B) boolean: did each bound fail at any t."""
        return np.array([self.trajectory(i).violated.any(axis=1) for i in rep_indices], dtype=bool)


def run_trajectory(config: ExperimentConfig, rep_index: int) -> Trace:
    return Experiment(config).trajectory(rep_index)


_WORKER_EXPERIMENT: Optional[Experiment] = None


def _init_worker(config):
    global _WORKER_EXPERIMENT
    _WORKER_EXPERIMENT = Experiment(config)


def _worker_chunk(rep_indices):
    return _WORKER_EXPERIMENT.violations(rep_indices)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def coverage(config: ExperimentConfig, workers: Optional[int] = None) -> CoverageReport:
    """Fraction of replications 0..reps-1 in which each bound is ever violated.

    Replications are independent and may run in worker processes; results are
    reduced in replication order, so the report does not depend on ``workers``.
    """
    experiment = Experiment(config)
    workers = default_workers() if workers is None else workers
    reps = np.arange(config.reps)
    if workers <= 1 or config.reps < 2:
        hits = experiment.violations(reps)
    else:
        chunks = np.array_split(reps, min(config.reps, 4 * workers))
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config,)) as pool:
            hits = np.concatenate(list(pool.map(_worker_chunk, chunks)))
    return CoverageReport(
        names=tuple(b.name for b in config.bounds),
        kinds=tuple(b.kind for b in config.bounds),
        scenario=config.scenario.kind,
        violations=hits.sum(axis=0),
        reps=config.reps,
        horizon=config.scenario.horizon,
        delta=config.delta,
    )


__all__ = [
    "BoundSpec",
    "CoverageReport",
    "Experiment",
    "ExperimentConfig",
    "ScenarioConfig",
    "Trace",
    "coverage",
    "gibbs_posterior",
    "gibbs_rows",
    "run_trajectory",
]
