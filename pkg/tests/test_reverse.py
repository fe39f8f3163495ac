from math import exp, log, sqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anytime_pacbayes import ConfigError, kl_inv_upper, klsf
from anytime_pacbayes.reverse import (
    THIEMANN_GRID,
    ConvexPhiSpec,
    catoni_phi,
    convex_phi_rhs_stitched,
    convex_phi_rhs_target,
    ipm_rhs_stitched,
    ipm_rhs_target,
    maurer_spec,
    mcallester_bound,
    mcallester_bound_target,
    quadratic_phi,
    renyi_convex_rhs,
    renyi_convex_rhs_target,
    seeger_rhs,
    seeger_rhs_target,
    thiemann_bound,
    thiemann_bound_opt,
)
from anytime_pacbayes.stitching import ZETA2, eta, il, log_xi, xi

IL1 = log(ZETA2)
SEEGER_T1 = log(2) + log(20) + IL1


def zero_spec(lam=1.0):
    return ConvexPhiSpec(klsf, lambda l, j: 0.0, lambda j: lam)


def test_convex_phi_examples():
    assert convex_phi_rhs_stitched(maurer_spec(), 1, 0.0, 0.05) == pytest.approx(SEEGER_T1, abs=1e-12)
    assert convex_phi_rhs_stitched(maurer_spec(), 1, 0.0, 0.05) == pytest.approx(4.18658, abs=1e-5)
    assert convex_phi_rhs_stitched(zero_spec(), 1, 0.0, 0.05) == pytest.approx(IL1 + log(20))


def test_convex_phi_uses_epoch_start():
    calls = []

    def oracle(lam, j):
        calls.append((lam, j))
        return 0.0

    spec = ConvexPhiSpec(klsf, oracle, lambda j: 10.0 * j)
    convex_phi_rhs_stitched(spec, 3, 0.0, 0.05)
    assert calls == [(20.0, 2)]
    t = np.arange(1, 40)
    out = convex_phi_rhs_stitched(maurer_spec(), t, 0.3, 0.05)
    assert out.shape == t.shape
    assert np.allclose(out, [(log_xi(eta(int(x))) + 0.3 + log(20) + il(int(x))) / eta(int(x)) for x in t])


def test_convex_phi_rejects_nonpositive_lambda():
    with pytest.raises(ConfigError):
        convex_phi_rhs_stitched(zero_spec(0.0), 1, 0.0, 0.05)


def test_convex_phi_target_examples():
    spec = maurer_spec()
    assert convex_phi_rhs_target(spec, 100, 100, 0.0, 0.05) == convex_phi_rhs_target(spec, 100, 1000, 0.0, 0.05)
    v = convex_phi_rhs_target(spec, 100, 100, 0.0, 0.05)
    assert v == pytest.approx((log(xi(100)) + log(20)) / 100, abs=1e-14)
    assert 0.05298 <= v <= 0.05991
    assert convex_phi_rhs_target(zero_spec(), 1, 5, 0.0, 0.05) == pytest.approx(log(20))
    with pytest.raises(ConfigError):
        convex_phi_rhs_target(spec, 100, 99, 0.0, 0.05)


def test_seeger_examples():
    assert seeger_rhs(1, 0.0, 0.05) == pytest.approx(4.18658, abs=1e-5)
    v = seeger_rhs_target(100, 0.0, 0.05)
    assert (log(sqrt(100)) + log(20)) / 100 <= v <= (log(2 * sqrt(100)) + log(20)) / 100
    assert 0.05298 <= v <= 0.05991
    for t in (1, 5, 64, 1000):
        assert seeger_rhs(t, 1.0, 0.05) - seeger_rhs(t, 0.0, 0.05) == pytest.approx(1 / eta(t))
    with pytest.raises(ConfigError):
        seeger_rhs(1, 0.0, 1.0)


def test_seeger_equals_maurer_wiring():
    t = np.arange(1, 2**12 + 1)
    kl = np.linspace(0, 3, t.size)
    a = convex_phi_rhs_stitched(maurer_spec(), t, kl, 0.05)
    b = seeger_rhs(t, kl, 0.05)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_stitched_vs_target_consistency():
    # every t up to 1024, then a log-spaced sweep to 2^16 including each epoch boundary
    sweep = np.unique(np.geomspace(1024, 2**16, 1500).astype(int))
    edges = 2 ** np.arange(11, 17)
    t = np.unique(np.concatenate([np.arange(1, 1025), sweep, edges - 1, edges]))
    stitched = seeger_rhs(t, 0.0, 0.05)
    target = np.array([seeger_rhs_target(int(x), 0.0, 0.05) for x in t])
    assert np.all(stitched <= 2 * target + 2 * il(t) / t + 2 * log(2) / t)


@given(st.integers(1, 10**6), st.floats(0, 20), st.floats(1e-4, 0.9), st.floats(0, 1))
def test_pinsker_relaxation_never_tighter(t, kl, delta, r_hat):
    b = seeger_rhs(t, kl, delta)
    assert min(1.0, r_hat + sqrt(b / 2)) >= kl_inv_upper(r_hat, b) - 1e-9


@given(st.integers(1, 10**6), st.floats(0, 20), st.floats(0, 20), st.floats(1e-4, 0.5))
def test_stitched_increasing_in_kl(t, k1, k2, delta):
    lo, hi = sorted((k1, k2))
    assert seeger_rhs(t, lo, delta) <= seeger_rhs(t, hi, delta)
    assert seeger_rhs(t, lo, delta) > 0
    assert seeger_rhs(t, lo, delta / 2) > seeger_rhs(t, lo, delta)


def test_mcallester_examples():
    tb = mcallester_bound_target(100, 0.0, 0.05, 0.0)
    assert tb.value == pytest.approx(sqrt(log(4000) / 200), abs=1e-12)
    assert tb.value == pytest.approx(0.20364, abs=1e-5)
    st1 = mcallester_bound(1, 0.0, 0.05, 0.0)
    assert st1.raw == pytest.approx(sqrt((log(40) + IL1) / 2), abs=1e-12)
    assert st1.raw == pytest.approx(1.44675, abs=1e-4)
    assert st1.value == 1.0
    assert mcallester_bound(1000, 0.0, 0.05, 1.0).value == 1.0


def test_thiemann_examples():
    b = thiemann_bound(1, 0.0, 0.05, 1.0, 0.0)
    assert b.raw == pytest.approx((log(40) + IL1) * 2, abs=1e-12)
    assert b.raw == pytest.approx(8.37313, abs=1e-4)
    assert thiemann_bound_opt(1, 0.0, 0.05, 0.0).raw <= b.raw
    with pytest.raises(ConfigError):
        thiemann_bound(1, 0.0, 0.05, 2.0, 0.0)


@given(st.integers(1, 2**20), st.floats(0, 5), st.floats(0, 1))
def test_thiemann_opt_is_grid_minimum(t, kl, r_hat):
    opt = thiemann_bound_opt(t, kl, 0.05, r_hat).raw
    on_grid = [thiemann_bound(t, kl, 0.05, lam, r_hat).raw for lam in THIEMANN_GRID]
    assert opt == pytest.approx(min(on_grid), rel=1e-12)
    assert opt <= thiemann_bound(t, kl, 0.05, 1.0, r_hat).raw + 1e-12


@pytest.mark.parametrize("k", [0, 3, 8, 15])
def test_thiemann_complexity_term_shrinks_with_epoch(k):
    a = thiemann_bound(2**k, 0.5, 0.05, 1.0, 0.0).raw
    b = thiemann_bound(2 ** (k + 1), 0.5, 0.05, 1.0, 0.0).raw
    assert b < a


def test_ipm_examples():
    spec = maurer_spec()
    assert ipm_rhs_stitched(spec, 7, 0.0, 0.05) == convex_phi_rhs_stitched(spec, 7, 0.0, 0.05)
    assert ipm_rhs_stitched(spec, 1, 0.2, 0.05) == pytest.approx(SEEGER_T1 + 0.2, abs=1e-12)
    assert ipm_rhs_stitched(spec, 1, 0.2, 0.05) == pytest.approx(4.38658, abs=1e-5)
    assert ipm_rhs_stitched(spec, 3, 0.2, 0.05) == convex_phi_rhs_stitched(spec, 3, 0.2, 0.05)
    assert ipm_rhs_target(spec, 64, 100, 0.2, 0.05) == convex_phi_rhs_target(spec, 64, 100, 0.2, 0.05)
    with pytest.raises(ConfigError):
        ipm_rhs_stitched(spec, 1, -0.1, 0.05)


def test_renyi_examples():
    assert renyi_convex_rhs(1, 2.0, 0.0, lambda j: 0.0, 0.05) == pytest.approx(0.5 * (log(20) + IL1), abs=1e-12)
    assert renyi_convex_rhs(1, 2.0, 0.0, lambda j: 0.0, 0.05) == pytest.approx(1.74671, abs=1e-4)
    big = renyi_convex_rhs(1, 1e9, 0.0, lambda j: 0.0, 0.05)
    assert big == pytest.approx(log(20) + IL1, rel=1e-8)
    a0 = renyi_convex_rhs(5, 3.0, 0.0, lambda j: 0.1, 0.05)
    a1 = renyi_convex_rhs(5, 3.0, 1.0, lambda j: 0.1, 0.05)
    assert a1 - a0 == pytest.approx(2 / 3)
    assert renyi_convex_rhs_target(10, 2.0, 0.0, 0.0, 0.05) == pytest.approx(0.5 * log(20))
    with pytest.raises(ConfigError):
        renyi_convex_rhs(1, 1.0, 0.0, lambda j: 0.0, 0.05)


def test_phi_functions():
    assert quadratic_phi(0.3, 0.5) == pytest.approx(0.08)
    phi = catoni_phi(1.0)
    assert phi(0.0, 0.0) == 0.0
    assert phi(0.2, 0.5) == pytest.approx(-0.2 - log(1 - 0.5 * (1 - exp(-1))))
    with pytest.raises(ConfigError):
        catoni_phi(0.0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_quadratic_phi_below_klsf(x, y):
    assert quadratic_phi(x, y) <= klsf(x, y) + 1e-12
