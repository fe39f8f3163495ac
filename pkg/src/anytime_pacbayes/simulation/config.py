"""INI-style experiment files.

    [experiment]    seed, reps, horizon, delta
    [scenario]      kind, params (comma list; lo:hi or mu:sigma pairs where needed),
                    optional moment_p, shape, urn_size
    [prior]         weights = uniform | comma list
    [posterior]     rule = gibbs | fixed, lambda_post, weights (fixed rule)
    [bound NAME]    kind, schedule = constant | target | sqrt_log | explicit,
                    lam, n, c, values, plus kind options (target_n, beta, alpha, ...)

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
from pathlib import Path

from ..exceptions import ConfigError
from ..forward import LambdaSchedule
from .bounds import BoundSpec
from .engine import ExperimentConfig, ScenarioConfig

_EXPERIMENT_KEYS = {"seed", "reps", "horizon", "delta"}
_SCENARIO_OPTIONS = {"moment_p": float, "shape": float, "urn_size": int}
_SCHEDULE_KEYS = {"schedule", "lam", "n", "c", "values"}
_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.replace("\n", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _params(text: str):
    items = [x.strip() for x in text.replace("\n", ",").split(",") if x.strip()]
    if not items:
        raise ConfigError("scenario params are empty")
    try:
        if all(":" in x for x in items):
            return tuple(tuple(float(v) for v in x.split(":")) for x in items)
        return tuple(float(x) for x in items)
    except ValueError:
        raise ConfigError(f"cannot parse scenario params {text!r}") from None


def _number(section, key, cast):
    raw = section[key]
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a valid {cast.__name__}") from None


def _option_value(raw: str):
    low = raw.strip().lower()
    if low in _BOOL:
        return _BOOL[low]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw.strip()


def _check_keys(section, allowed):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"[{section.name}] unknown keys: {', '.join(sorted(extra))}")


def _schedule(section):
    kind = section.get("schedule")
    if kind is None:
        return None
    if kind == "constant":
        return LambdaSchedule.constant(_number(section, "lam", float))
    if kind == "target":
        return LambdaSchedule.target(_number(section, "lam", float), _number(section, "n", int))
    if kind == "sqrt_log":
        return LambdaSchedule.sqrt_log(_number(section, "c", float))
    if kind == "explicit":
        return LambdaSchedule.from_values(_floats(section["values"]))
    raise ConfigError(f"[{section.name}] unknown schedule {kind!r}")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {str(exc).splitlines()[0]}") from None
    for name in parser.sections():
        if name not in ("experiment", "scenario", "prior", "posterior") and not name.startswith("bound "):
            raise ConfigError(f"unknown section [{name}]")
    for required in ("experiment", "scenario"):
        if required not in parser:
            raise ConfigError(f"missing section [{required}]")
    exp = parser["experiment"]
    _check_keys(exp, _EXPERIMENT_KEYS)
    if "horizon" not in exp:
        raise ConfigError("[experiment] needs horizon")
    horizon = _number(exp, "horizon", int)

    sc = parser["scenario"]
    _check_keys(sc, {"kind", "params"} | set(_SCENARIO_OPTIONS))
    if "kind" not in sc or "params" not in sc:
        raise ConfigError("[scenario] needs kind and params")
    scenario = ScenarioConfig(
        kind=sc["kind"].strip(),
        params=_params(sc["params"]),
        horizon=horizon,
        options={k: _number(sc, k, cast) for k, cast in _SCENARIO_OPTIONS.items() if k in sc},
    )

    prior_weights = None
    if "prior" in parser:
        _check_keys(parser["prior"], {"weights"})
        w = parser["prior"].get("weights", "uniform").strip()
        prior_weights = None if w == "uniform" else tuple(_floats(w))

    rule, lambda_post, post_weights = "gibbs", 1.0, None
    if "posterior" in parser:
        post = parser["posterior"]
        _check_keys(post, {"rule", "lambda_post", "weights"})
        rule = post.get("rule", "gibbs").strip()
        if "lambda_post" in post:
            lambda_post = _number(post, "lambda_post", float)
        if "weights" in post:
            post_weights = tuple(_floats(post["weights"]))

    bounds = []
    for name in parser.sections():
        if not name.startswith("bound "):
            continue
        sec = parser[name]
        if "kind" not in sec:
            raise ConfigError(f"[{name}] needs kind")
        options = {k: _option_value(v) for k, v in sec.items() if k not in _SCHEDULE_KEYS | {"kind"}}
        bounds.append(BoundSpec(name[len("bound "):].strip(), sec["kind"].strip(), _schedule(sec), options))

    return ExperimentConfig(
        scenario=scenario,
        bounds=tuple(bounds),
        delta=_number(exp, "delta", float) if "delta" in exp else 0.05,
        posterior_rule=rule,
        lambda_post=lambda_post,
        posterior_weights=post_weights,
        prior_weights=prior_weights,
        reps=_number(exp, "reps", int) if "reps" in exp else 100,
        seed=_number(exp, "seed", int) if "seed" in exp else 0,
    )


def load_config(path) -> ExperimentConfig:
    """Read and parse a config file; OSError propagates for missing files."""
    return parse_config(Path(path).read_text())
