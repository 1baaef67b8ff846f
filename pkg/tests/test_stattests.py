import numpy as np
import pytest

from rwdelab import rng
from rwdelab import stattests as st
from rwdelab.envs.boolean import BooleanConfig, RadiusLaw
from rwdelab.lattice import Box, UsageError


def test_wilson_ci():
    lo, hi = st.wilson_ci(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = st.wilson_ci(50, 100)
    assert lo < 0.5 < hi
    with pytest.raises(UsageError):
        st.wilson_ci(1, 0)


def test_loglog_slope_examples():
    slope, se = st.loglog_slope([(1, 1.0), (2, 0.25), (4, 0.0625), (8, 0.015625)])
    assert slope == pytest.approx(-2.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UsageError):
        st.loglog_slope([(1, 1.0), (2, 0.5)])
    with pytest.raises(UsageError):
        st.loglog_slope([(1, 1.0), (2, 0.5), (3, -0.1)])


def test_loglog_slope_under_noise():
    gen = np.random.default_rng(0)
    hits = 0
    for _ in range(50):
        xs = np.array([1.0, 2, 4, 8, 16, 32])
        ys = 3.0 * xs**-2 * (1 + gen.normal(0, 0.05, xs.size))
        slope, _ = st.loglog_slope(list(zip(xs, ys)))
        hits += -2.3 < slope < -1.7
    assert hits >= 48


def test_ks_gaussian_null_calibration():
    gen = np.random.default_rng(11)
    rejected = sum(
        st.ks_gaussian(gen.normal(size=300), 0.0, 1.0).p_value < 0.05
        for _ in range(200)
    )
    assert abs(rejected / 200 - 0.05) < 0.04


def test_ks_gaussian_power_and_errors():
    gen = np.random.default_rng(12)
    rejected = sum(
        st.ks_gaussian(gen.normal(1.0, 1.0, 2000), 0.0, 1.0).p_value < 0.05
        for _ in range(30)
    )
    assert rejected >= 30 * 0.99
    with pytest.raises(UsageError):
        st.ks_gaussian(np.empty((0, 1)), 0.0, 1.0)
    with pytest.raises(UsageError):
        st.ks_gaussian(np.zeros((10, 2)), np.zeros(2), np.zeros((2, 2)))


def test_ks_gaussian_multivariate():
    gen = np.random.default_rng(13)
    cov = np.array([[2.0, 0.7], [0.7, 1.0]])
    x = gen.multivariate_normal([1.0, -2.0], cov, size=3000)
    rep = st.ks_gaussian(x, [1.0, -2.0], cov)
    assert rep.p_value > 0.05
    assert rep.method == "ks-whitened-bonferroni"


def test_chi2_2x2_paths():
    rep = st.chi2_2x2(np.array([[500, 500], [500, 500]]))
    assert rep.method == "chi2-asymptotic" and rep.p_value > 0.9
    rep = st.chi2_2x2(np.array([[300, 20], [30, 400]]))
    assert rep.p_value < 1e-10
    rep = st.chi2_2x2(np.array([[3, 1], [1, 4]]))
    assert rep.method == "chi2-exact-conditional"
    rep = st.chi2_2x2(np.array([[10, 0], [15, 0]]))
    assert rep.inconclusive  # degenerate margin is never a pass
    with pytest.raises(UsageError):
        st.chi2_2x2(np.array([[1, 2, 3], [4, 5, 6]]))


def test_chi2_null_calibration_both_paths():
    gen = np.random.default_rng(3)
    for n, expect_sparse in ((12, True), (600, False)):
        rejected = 0
        batteries = 200
        for _ in range(batteries):
            a = gen.random(n) < 0.4
            b = gen.random(n) < 0.3
            table = np.array([[np.sum(~a & ~b), np.sum(~a & b)],
                              [np.sum(a & ~b), np.sum(a & b)]])
            rep = st.chi2_2x2(table)
            if not rep.inconclusive and rep.p_value < 0.05:
                rejected += 1
        # exact conditioning is conservative; the asymptotic path is nominal
        assert rejected / batteries <= 0.07
        if not expect_sparse:
            assert rejected / batteries >= 0.02


def test_box_functional_reducers():
    f = st.BoxFunctional(Box((0, 0), (1, 1)), "regen", "all_zero")
    assert f.apply_bits([0, 0, 0, 0]) == 1
    assert f.apply_bits([0, 1, 0, 0]) == 0
    g = st.BoxFunctional(Box((0, 0), (1, 1)), "regen", "any_one")
    assert g.apply_bits([0, 0, 0, 1]) == 1
    h = st.BoxFunctional(Box((0, 0), (1, 1)), "regen", "parity")
    assert h.apply_bits([1, 1, 1, 0]) == 1
    k = st.BoxFunctional(Box((0, 0), (1, 1)), "regen", "count_ge", threshold=2)
    assert k.apply_bits([1, 0, 1, 0]) == 1 and k.apply_bits([1, 0, 0, 0]) == 0
    with pytest.raises(UsageError):
        st.BoxFunctional(Box((0, 0), (1, 1)), "nope", "all_zero")


def test_decoupling_constant_functional_is_exact_zero():
    """A field with regeneration everywhere makes both statistics
    constant, so the measured covariance is exactly zero."""
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.0,
                        radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                        rho_max=4.0)
    f1 = st.BoxFunctional(Box((0, -6), (1, -5)), "regen", "any_one")
    f2 = st.BoxFunctional(Box((0, 2), (1, 3)), "regen", "any_one")
    out = st.decoupling_test(cfg, f1, f2, 500, 3, c_constant=0.1)
    assert out.covariance == 0.0 and out.passed


def test_decoupling_preconditions(boolean_small):
    f1 = st.BoxFunctional(Box((0, -2), (1, 2)), "regen", "any_one")
    f2 = st.BoxFunctional(Box((0, 1), (1, 3)), "regen", "any_one")
    with pytest.raises(UsageError):
        st.decoupling_test(boolean_small, f1, f2, 100, 1, 0.1)  # overlap
    f3 = st.BoxFunctional(Box((0, 5), (1, 7)), "vacant", "any_one")
    with pytest.raises(UsageError):
        st.decoupling_test(boolean_small, f1, f3, 100, 1, 0.1)  # wrong field


def test_independent_coin_control():
    """The covariance machinery on truly independent coins stays within
    3 SE of zero."""
    gen = np.random.default_rng(8)
    a = gen.random(40_000) < 0.5
    b = gen.random(40_000) < 0.5
    counts = np.array([[np.sum(~a & ~b), np.sum(~a & b)],
                       [np.sum(a & ~b), np.sum(a & b)]])
    cov, se, _ = st._cov_from_counts(counts, 500, 1)
    assert abs(cov) <= 3 * se


def test_decoupling_battery_small(renewal_small):
    out = st.decoupling_battery(renewal_small, 8, 1500, 77)
    assert out["n_passed"] >= 7
    assert out["c_constant"] > 0


def test_rmp_preconditions(boolean_small):
    past = st.BoxFunctional(Box((0, -3), (0, -1)), "vacant", "any_one")
    future_bad = st.BoxFunctional(Box((0, 1), (0, 3)), "regen", "any_one")
    with pytest.raises(UsageError):
        st.rmp_test(boolean_small, past, future_bad, 100, 1)
    outside = st.BoxFunctional(Box((9, 1), (9, 2)), "vacant", "any_one")
    with pytest.raises(UsageError):
        st.rmp_test(boolean_small, past, outside, 100, 1)


def test_rmp_constant_future_inconclusive(boolean_small):
    past = st.BoxFunctional(Box((0, -3), (0, -1)), "vacant", "any_one")
    # threshold no box can reach: the statistic is constant zero
    future = st.BoxFunctional(Box((0, 1), (0, 2)), "vacant", "count_ge", threshold=50)
    rep = st.rmp_test(boolean_small, past, future, 300, 5)
    assert rep.inconclusive


def test_rmp_single_pair_null(boolean_small):
    past = st.BoxFunctional(Box((-1, -4), (1, -2)), "vacant", "parity")
    future = st.BoxFunctional(Box((-1, 2), (1, 4)), "vacant", "parity")
    rep = st.rmp_test(boolean_small, past, future, 2000, 9)
    assert not rep.inconclusive
    assert rep.p_value > 0.001  # conditional independence holds for this pair


def test_rmp_positive_control_power():
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.05,
                        radius_law=RadiusLaw.pareto(2.0, 4.0), trunc_s=16,
                        rho_max=32.0)
    out = st.rmp_positive_control(cfg, 4000, 21, n_reps=10)
    assert out["power"] >= 0.9


def test_env_tail_exponent(boolean_small, renewal_small):
    assert st.env_tail_exponent(boolean_small) == pytest.approx(2.0)
    # geometric fixture declares a finite 5th moment: 1+beta = 5, d = 1
    assert st.env_tail_exponent(renewal_small) == pytest.approx(2.0)


def test_decoupling_covariance_slope():
    """Measured covariance of fixed-shape box pairs decays in the
    separation at least at the analytic polynomial rate (slope <= -1.5
    for the long-correlation family with tail exponent 2)."""
    cfg = BooleanConfig(d=1, cone_slope=1, lam=1.3e-3,
                        radius_law=RadiusLaw.pareto(12.0, 4.0),
                        trunc_s=64, rho_max=32.0)
    pts = []
    for sep, n in ((8, 40_000), (16, 40_000), (32, 120_000), (64, 250_000)):
        f1 = st.BoxFunctional(Box((0, -4 - sep), (4, -sep)), "regen", "all_zero")
        f2 = st.BoxFunctional(Box((0, 1), (4, 5)), "regen", "all_zero")
        counts = st._decouple_counts(cfg, f1, f2, n, rng.derive(3, sep))
        cov, se, _ = st._cov_from_counts(counts, 200, 1)
        if cov > 0:
            pts.append((sep, cov))
    # beyond the window the boxes are exactly independent, so the far
    # point may vanish into noise; fit whatever stayed positive
    assert len(pts) >= 3
    slope, _ = st.loglog_slope(pts)
    assert slope <= -1.5
