"""Command-line front end.

Exit status: 0 on success, 2 on a configuration error (one-line message on
stderr), 1 on an I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from math import e, exp, log
from typing import Optional

import numpy as np

from . import reverse
from .confseq import default_lambda_schedule, stitched_cs, subgaussian_cs
from .divergences import FiniteMixture, kl_divergence, kl_inv_upper, renyi_divergence
from .exceptions import ConfigError
from .forward import (
    BoundKind,
    ForwardBoundState,
    LambdaSchedule,
    StepObservation,
    gap_lhs,
    gaussian_mixture_rhs,
    rhs,
)
from .simulation.engine import WORKERS_ENV, Experiment, coverage, gibbs_posterior
from .simulation.config import load_config
from .stitching import log_xi, xi

REVERSE_CLI_KINDS = ("seeger", "mcallester", "thiemann", "convex-phi", "renyi", "ipm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(x: float) -> str:
    return repr(float(x))


def _delta(text: str) -> float:
    try:
        d = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"delta must be a number, got {text!r}") from None
    if not 0.0 < d < 1.0:
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1), got {text}")
    return d


def _mixture(text: str, k: int) -> FiniteMixture:
    if text == "uniform":
        return FiniteMixture.uniform(k)
    try:
        w = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse weights {text!r}") from None
    if w.size != k:
        raise ConfigError(f"expected {k} weights, got {w.size}")
    return FiniteMixture(w)


class _PosteriorPath:
    """Fixed weights, or a Gibbs posterior refreshed from cumulative losses."""

    def __init__(self, text: str, prior: FiniteMixture):
        self.prior = prior
        self.gibbs = None
        if text.startswith("gibbs:"):
            try:
                self.gibbs = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"cannot parse {text!r}; use gibbs:<lambda>") from None
            self.fixed = None
        else:
            self.fixed = prior if text == "prior" else _mixture(text, len(prior))

    def at(self, cum_loss: np.ndarray) -> FiniteMixture:
        if self.gibbs is None:
            return self.fixed
        return gibbs_posterior(self.prior, cum_loss, self.gibbs)


def _read_table(path: str):
    """CSV with a header row -> (header list, float matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric cell ({exc})") from None
    if data.size == 0:
        raise ConfigError(f"{path} has no data rows")
    if data.shape[1] != len(header):
        raise ConfigError(f"{path}: rows do not match the header")
    return header, data


def _columns(header, data, prefix):
    names = [h for h in header if h.startswith(prefix + "_")]
    if not names:
        return None
    order = sorted(names, key=lambda h: int(h.split("_", 1)[1]))
    return data[:, [header.index(h) for h in order]]


def _scalar_col(header, data, name):
    return data[:, header.index(name)] if name in header else None


def _write(rows, header, out: Optional[str]):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(out, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _forward_rows(args, header, data, losses, prior, post):
    kind = BoundKind(args.kind.replace("-", "_"))
    if args.at is not None:
        raise ConfigError("--at applies to the reverse kinds only")
    k = losses.shape[1]
    lam = _scalar_col(header, data, "lambda")
    if lam is None and kind != BoundKind.GAUSSIAN_MIXTURE:
        raise ConfigError("input needs a lambda column")
    if lam is not None:
        schedule = LambdaSchedule.from_values(lam)
    else:
        schedule = LambdaSchedule.constant(1.0)
    mu = _columns(header, data, "mu")
    var = _columns(header, data, "sigma2")
    m2 = _columns(header, data, "m2")
    log_mgf = _columns(header, data, "logmgf")
    scalars = {n: _scalar_col(header, data, n) for n in ("sigma_sub", "H", "c", "kappa", "p")}
    state = ForwardBoundState(kind, k, bennett_proxy=args.bennett_proxy)
    rows = []
    cum = np.zeros(k)
    for i in range(len(data)):
        obs = StepObservation(
            loss=losses[i],
            mean=None if mu is None else mu[i],
            variance=None if var is None else var[i],
            second_moment=None if m2 is None else m2[i],
            # a logmgf_k cell is ln E[exp(lambda_t f) | past] at that row's lambda
            log_mgf=None if log_mgf is None else (lambda lam, v=log_mgf[i]: v),
            **{n: (None if col is None else float(col[i])) for n, col in scalars.items()},
        )
        state.update(schedule, obs)
        cum += losses[i]
        rho = post.at(cum)
        kl = kl_divergence(rho, prior)
        if kind == BoundKind.GAUSSIAN_MIXTURE and args.beta is not None:
            bound = gaussian_mixture_rhs(state, args.beta, kl, args.delta)
        else:
            bound = rhs(state, rho, prior, args.delta, simplified=args.simplified)
        rows.append([i + 1, _fmt(gap_lhs(state, rho)), _fmt(bound), _fmt(kl)])
    return rows


def _reverse_spec(args):
    """ConvexPhiSpec with a distribution-free MGF bound for i.i.d. [0,1] losses."""
    if args.phi in ("kl", "quadratic"):
        # 2(x - y)^2 <= klsf(x||y), so ln xi(j) bounds both MGFs at lambda_j = j
        return reverse.maurer_spec()
    if args.phi == "catoni":
        # E exp(-c j R_hat_j) <= (1 - R (1 - e^-c))^j for [0,1] losses
        return reverse.ConvexPhiSpec(reverse.catoni_phi(args.catoni_c), lambda lam, j: 0.0, float)
    raise ConfigError(f"unknown phi {args.phi!r}")


def _risk_from_phi(args, r_hat: float, bound: float) -> float:
    """Upper bound on E_rho R implied by E_rho phi(R_hat, R) <= bound."""
    if not np.isfinite(bound):
        return float("nan")
    if args.phi == "kl" or args.kind in ("renyi", "ipm"):
        return kl_inv_upper(min(max(r_hat, 0.0), 1.0), max(bound, 0.0))
    if args.phi == "quadratic":
        return min(1.0, r_hat + np.sqrt(max(bound, 0.0) / 2.0))
    a = -np.expm1(-args.catoni_c)
    return min(1.0, -np.expm1(-bound - args.catoni_c * r_hat) / a)


def _reverse_rows(args, losses, prior, post):
    if np.any(losses < 0) or np.any(losses > 1):
        raise ConfigError("reverse kinds need losses in [0, 1]")
    n = args.at
    if n is not None and n < 1:
        raise ConfigError("--at must be >= 1")
    if args.kind == "ipm" and args.gamma is None:
        raise ConfigError("ipm needs --gamma, the IPM value for the chosen function class")
    if args.kind == "renyi" and not args.alpha > 1:
        raise ConfigError("--alpha must exceed 1")
    spec = _reverse_spec(args)
    power = args.alpha / (args.alpha - 1.0)

    def moment(j):
        # x^a <= (a / (e j))^a exp(j x) and E exp(j klsf) <= xi(j)
        return power * log(power / (e * j)) + log_xi(j)

    rows = []
    cum = np.zeros(losses.shape[1])
    for i in range(len(losses)):
        t = i + 1
        cum += losses[i]
        rho = post.at(cum)
        kl = kl_divergence(rho, prior)
        r_hat = float(rho.weights @ (cum / t))
        early = n is not None and t < n
        if args.kind == "seeger":
            b = np.nan if early else (reverse.seeger_rhs(t, kl, args.delta) if n is None else reverse.seeger_rhs_target(n, kl, args.delta))
            risk = _risk_from_phi(args, r_hat, b)
        elif args.kind == "mcallester":
            rb = reverse.mcallester_bound(t, kl, args.delta, r_hat) if n is None else reverse.mcallester_bound_target(n, kl, args.delta, r_hat)
            risk = np.nan if early else rb.value
        elif args.kind == "thiemann":
            if n is not None:
                raise ConfigError("thiemann has no target-time form")
            risk = reverse.thiemann_bound_opt(t, kl, args.delta, r_hat).value
        elif args.kind == "convex-phi":
            b = np.nan if early else (reverse.convex_phi_rhs_stitched(spec, t, kl, args.delta) if n is None else reverse.convex_phi_rhs_target(spec, n, t, kl, args.delta))
            risk = _risk_from_phi(args, r_hat, b)
        elif args.kind == "ipm":
            spec = reverse.maurer_spec()
            b = np.nan if early else (reverse.ipm_rhs_stitched(spec, t, args.gamma, args.delta) if n is None else reverse.ipm_rhs_target(spec, n, t, args.gamma, args.delta))
            risk = _risk_from_phi(args, r_hat, b)
        else:
            d = renyi_divergence(rho, prior, args.alpha)
            if early:
                b = np.nan
            elif n is None:
                b = reverse.renyi_convex_rhs(t, args.alpha, d, moment, args.delta)
            else:
                b = reverse.renyi_convex_rhs_target(n, args.alpha, d, moment(n), args.delta)
            risk = _risk_from_phi(args, r_hat, exp(b) if np.isfinite(b) else b)
        rows.append([t, _fmt(r_hat), _fmt(risk), _fmt(kl)])
    return rows


def cmd_bound(args):
    header, data = _read_table(args.input)
    losses = _columns(header, data, "loss")
    if losses is None:
        raise ConfigError("input needs loss_0, loss_1, ... columns")
    k = losses.shape[1]
    prior = _mixture(args.prior, k)
    post = _PosteriorPath(args.posterior, prior)
    if args.kind in REVERSE_CLI_KINDS:
        rows = _reverse_rows(args, losses, prior, post)
    else:
        try:
            BoundKind(args.kind.replace("-", "_"))
        except ValueError:
            raise ConfigError(f"unknown bound kind {args.kind!r}") from None
        rows = _forward_rows(args, header, data, losses, prior, post)
    _write(rows, ["t", "lhs", "rhs", "kl"], args.out)


def _parse_schedule(text: str, delta: float, sigma: float) -> LambdaSchedule:
    if text == "default":
        return default_lambda_schedule(delta, sigma)
    kind, _, rest = text.partition(":")
    try:
        vals = [float(x) for x in rest.split(",")] if rest else []
        if kind == "constant" and len(vals) == 1:
            return LambdaSchedule.constant(vals[0])
        if kind == "target" and len(vals) == 2:
            return LambdaSchedule.target(vals[0], int(vals[1]))
        if kind == "sqrt_log" and len(vals) == 1:
            return LambdaSchedule.sqrt_log(vals[0])
    except ValueError:
        pass
    raise ConfigError(f"cannot parse schedule {text!r}; use default, constant:L, target:L,N or sqrt_log:C")


def cmd_cs(args):
    if not args.sigma > 0:
        raise ConfigError("--sigma must be positive")
    header, data = _read_table(args.input)
    losses = _columns(header, data, "loss")
    if losses is None:
        raise ConfigError("input needs loss_0, loss_1, ... columns")
    prior = _mixture(args.prior, losses.shape[1])
    rho = _mixture(args.posterior, losses.shape[1]) if args.posterior != "prior" else prior
    kl = kl_divergence(rho, prior)
    per_step = losses @ rho.weights
    t = np.arange(1, len(per_step) + 1)
    if args.stitched:
        seq = stitched_cs(np.cumsum(per_step) / t, t, kl, args.delta, args.sigma)
    else:
        schedule = _parse_schedule(args.schedule, args.delta, args.sigma)
        lam = schedule.values(len(per_step))
        seq = subgaussian_cs(np.cumsum(lam * per_step), t, schedule, args.sigma, kl, args.delta)
    rows = [[int(ti), _fmt(c), _fmt(lo), _fmt(hi)] for ti, c, lo, hi in zip(seq.t, seq.center, seq.lower, seq.upper)]
    _write(rows, ["t", "center", "lo", "hi"], args.out)


def cmd_simulate(args):
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.reps is not None:
        overrides["reps"] = args.reps
    if overrides:
        config = replace(config, **overrides)
    report = coverage(config, workers=args.workers)
    rows = [
        [name, kind, report.scenario, report.reps, report.horizon, _fmt(report.delta), int(v),
         _fmt(rate), _fmt(se), _fmt(report.threshold)]
        for name, kind, v, rate, se in zip(report.names, report.kinds, report.violations,
                                           report.violation_rate, report.std_error)
    ]
    header = ["bound", "kind", "scenario", "reps", "horizon", "delta", "violations",
              "violation_rate", "std_error", "threshold"]
    _write(rows, header, args.out)
    if args.trace:
        trace = Experiment(config).trajectory(0)
        violated = trace.violated
        trace_rows = [
            [int(t), name, _fmt(trace.lhs[b, i]), _fmt(trace.rhs[b, i]), _fmt(trace.kl[i]), int(violated[b, i])]
            for i, t in enumerate(trace.t)
            for b, name in enumerate(trace.names)
        ]
        _write(trace_rows, ["t", "bound", "lhs", "rhs", "kl", "violated"], args.trace)


def cmd_invert_kl(args):
    print(f"{kl_inv_upper(args.p_hat, args.c):.12g}")


def cmd_xi(args):
    if args.k < 1:
        raise ConfigError("k must be >= 1")
    print(f"{xi(args.k):.12g}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anytime-pacbayes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", help="bound trajectory from a per-step observation CSV")
    p.add_argument("--kind", required=True,
                   help="forward: " + ", ".join(k.value for k in BoundKind) + "; reverse: " + ", ".join(REVERSE_CLI_KINDS))
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--delta", type=_delta, default=0.05)
    p.add_argument("--prior", default="uniform", help="uniform or comma-separated weights")
    p.add_argument("--posterior", default="prior", help="prior, comma-separated weights or gibbs:<lambda>")
    p.add_argument("--at", type=int, help="target time n (reverse kinds)")
    p.add_argument("--beta", type=float, help="single mixture variance for gaussian_mixture")
    p.add_argument("--phi", default="kl", choices=("kl", "quadratic", "catoni"))
    p.add_argument("--catoni-c", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=2.0, help="Renyi order")
    p.add_argument("--gamma", type=float, help="IPM value for the ipm kind")
    p.add_argument("--simplified", action="store_true", help="bercu_touati simplified form")
    p.add_argument("--bennett-proxy", default="variance", choices=("variance", "squared_mean"))
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("cs", help="confidence sequence from a loss CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--delta", type=_delta, default=0.05)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--prior", default="uniform")
    p.add_argument("--posterior", default="prior")
    p.add_argument("--stitched", action="store_true")
    p.add_argument("--schedule", default="default")
    p.set_defaults(func=cmd_cs)

    p = sub.add_parser("simulate", help="Monte Carlo coverage from an experiment file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="coverage CSV (stdout if omitted)")
    p.add_argument("--trace", help="per-t trace CSV of replication 0")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("invert-kl", help="largest q with klsf(p_hat||q) <= c")
    p.add_argument("p_hat", type=float)
    p.add_argument("c", type=float)
    p.set_defaults(func=cmd_invert_kl)

    p = sub.add_parser("xi", help="xi(k)")
    p.add_argument("k", type=int)
    p.set_defaults(func=cmd_xi)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
