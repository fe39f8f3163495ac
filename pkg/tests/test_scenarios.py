import numpy as np
import pytest
from scipy import stats

from anytime_pacbayes import ConfigError
from anytime_pacbayes.simulation.scenarios import SCENARIO_KINDS, make_scenario

SETUPS = {
    "bernoulli_iid": [0.1, 0.5, 0.9],
    "uniform_bounded": [[0.0, 1.0], [0.2, 0.4]],
    "gaussian": [[0.5, 1.0], [-0.3, 0.5]],
    "pareto_heavy": [0.5, 2.0],
    "sampling_without_replacement": [0.2, 0.6],
    "mds_bounded": [0.5, 1.0],
}


def draw(kind, horizon=200_000, seed=3, **kw):
    sc = make_scenario(kind, np.array(SETUPS[kind], dtype=float), horizon, **kw)
    return sc, sc.draw(np.random.Generator(np.random.Philox(key=[seed, 0])))


def test_registry_complete():
    assert set(SCENARIO_KINDS) == set(SETUPS)


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_conditional_mean_is_unbiased(kind):
    sc, s = draw(kind)
    resid = s.loss - s.mean
    se = np.sqrt(s.variance.mean(axis=0) / s.loss.shape[0])
    assert np.all(np.abs(resid.mean(axis=0)) < 5 * se)


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_conditional_variance(kind):
    sc, s = draw(kind)
    sq = (s.loss - s.mean) ** 2
    assert np.allclose(sq.mean(axis=0), s.variance.mean(axis=0), rtol=0.05 if kind != "pareto_heavy" else 0.25)
    assert np.allclose(s.second_moment, s.variance + s.mean**2)


@pytest.mark.parametrize("kind", [k for k in SCENARIO_KINDS if k not in ("mds_bounded",)])
def test_stationary_risk_matches_sample_mean(kind):
    sc, s = draw(kind)
    assert np.allclose(s.loss.mean(axis=0), sc.risk, atol=0.02 * max(1.0, np.max(sc.risk)))


@pytest.mark.parametrize("kind", ["bernoulli_iid", "uniform_bounded", "gaussian", "mds_bounded", "sampling_without_replacement"])
def test_log_mgf_matches_monte_carlo(kind):
    sc, s = draw(kind)
    lam = 0.7
    if kind in ("mds_bounded", "sampling_without_replacement"):
        # conditional MGF: compare the martingale normaliser exp(lam f - log_mgf) to 1
        z = np.exp(lam * s.loss - s.log_mgf(lam))
        assert np.allclose(z.mean(axis=0), 1.0, atol=0.02)
    else:
        mc = np.log(np.exp(lam * s.loss).mean(axis=0))
        assert np.allclose(mc, np.broadcast_to(s.log_mgf(lam), s.loss.shape)[0], atol=0.02)


def test_bernoulli_shares_datum():
    sc, s = draw("bernoulli_iid", horizon=1000)
    # a single uniform per step makes the losses nested across parameters
    assert np.all(s.loss[:, 0] <= s.loss[:, 1]) and np.all(s.loss[:, 1] <= s.loss[:, 2])


def test_sample_mean_law_is_binomial():
    sc = make_scenario("bernoulli_iid", np.array([0.3]), 10)
    support, pmf = sc.sample_mean_law(10)
    assert support[3] == pytest.approx(0.3)
    assert pmf.sum() == pytest.approx(1.0)
    assert pmf[0, 3] == pytest.approx(stats.binom.pmf(3, 10, 0.3))


def test_urn_is_exchangeable_and_exact():
    sc = make_scenario("sampling_without_replacement", np.array([0.25]), 40, urn_size=40)
    rng = np.random.Generator(np.random.Philox(key=[1, 0]))
    s = sc.draw(rng)
    # drawing the whole urn reveals every item exactly once
    assert s.loss.sum() == 10
    support, pmf = sc.sample_mean_law(8)
    assert pmf.sum() == pytest.approx(1.0)
    assert np.all(s.mean >= 0) and np.all(s.mean <= 1)


def test_pareto_kappa_matches_monte_carlo():
    sc, s = draw("pareto_heavy", horizon=1_000_000, moment_p=1.5)
    mc = (np.abs(s.loss - s.mean) ** 1.5).mean(axis=0)
    assert np.allclose(mc, s.kappa, rtol=0.05)


def test_mds_is_centred_and_predictable():
    sc, s = draw("mds_bounded", horizon=50_000)
    f = 1.0 - s.loss
    assert np.all(np.abs(f) <= np.array(SETUPS["mds_bounded"]) + 1e-12)
    assert np.all(np.abs(s.mean - s.loss) <= sc.H)
    assert abs(f[:, 1].mean()) < 0.02
    assert not sc.exchangeable


def test_degenerate_bernoulli_is_deterministic():
    sc = make_scenario("bernoulli_iid", np.array([0.0, 1.0]), 100)
    s = sc.draw(np.random.default_rng(0))
    assert np.all(s.loss == s.mean)


@pytest.mark.parametrize(
    "kind,params,kw",
    [
        ("bernoulli_iid", [1.5], {}),
        ("uniform_bounded", [[0.5, 0.2]], {}),
        ("gaussian", [[0.0, -1.0]], {}),
        ("pareto_heavy", [1.0], {"shape": 2.0}),
        ("sampling_without_replacement", [0.5], {"urn_size": 5}),
        ("mds_bounded", [1.5], {}),
        ("nope", [0.5], {}),
        ("bernoulli_iid", [0.5], {"moment_p": 3.0}),
        ("bernoulli_iid", [0.5], {"shape": 3.0}),
    ],
)
def test_invalid_scenarios(kind, params, kw):
    with pytest.raises(ConfigError):
        make_scenario(kind, np.array(params, dtype=float), 10, **kw)
