import itertools

import numpy as np
import pytest

from rwdelab import rng
from rwdelab.envs.boolean import BooleanConfig, BooleanEnv, RadiusLaw
from rwdelab.envs.renewal import InterarrivalLaw, RenewalConfig
from rwdelab.lattice import AllowedPath, Site, UsageError, box1d
from rwdelab.renorm import (
    ScaleLadder,
    TrapSet,
    count_threats,
    estimate_low_threat_paths,
    estimate_qk,
    estimate_void_runs,
    is_threatened,
    min_threat_count,
    triggering_horizon,
    verify_fall_on_trap,
    void_run_recursion_check,
)
from rwdelab.walk import lazy_srw_kernel


def test_scale_ladder():
    lad = ScaleLadder(1, 4)
    assert [lad.scale(k) for k in lad.ks()] == [4, 16, 64, 256]
    with pytest.raises(UsageError):
        lad.scale(5)
    with pytest.raises(UsageError):
        ScaleLadder(3, 2)


def test_is_threatened_examples():
    for H in (1, 3, 5):
        assert is_threatened(Site((0,), 0), H, TrapSet.from_sites([(0, H)]))
    for H in (1, 2, 5):
        assert not is_threatened(Site((0,), 0), H, TrapSet.from_sites([(H + 1, 1)]))
    with pytest.raises(UsageError):
        is_threatened(Site((0,), 0), 0, TrapSet.from_sites([]))


def _brute_threatened(z, H, traps):
    """Enumerate all slope-1 paths of length H from z."""
    for steps in itertools.product((-1, 0, 1), repeat=H):
        x, t = z.x[0], z.t
        if traps.contains(x, t):
            return True
        for s in steps:
            x += s
            t += 1
            if traps.contains(x, t):
                return True
    return False


def test_is_threatened_vs_path_enumeration():
    gen = np.random.default_rng(12)
    for _ in range(500):
        H = int(gen.integers(1, 6))
        traps = TrapSet.from_sites(
            (int(gen.integers(-6, 7)), int(gen.integers(0, H + 2)))
            for _ in range(int(gen.integers(0, 5))))
        z = Site((0,), 0)
        assert is_threatened(z, H, traps) == _brute_threatened(z, H, traps)


def test_count_threats_examples():
    path = AllowedPath(0, ((0,),) * 5, 1)  # vertical path over [0, 4]
    assert count_threats(path, 2, TrapSet.from_sites([])) == 0
    traps = TrapSet.from_sites([(0, 2)])
    assert count_threats(path, 2, traps) == 2  # threatened at t = 0 and t = 2
    # counted times never exceed the H-multiples on the span
    for H in (1, 2, 4):
        assert count_threats(path, H, traps) <= path.length // H + 1


def test_min_threats_examples():
    assert min_threat_count(2, 2, TrapSet.from_sites([]), (0, 0), 1) == 0
    traps = TrapSet.from_sites([(0, 2)])
    assert min_threat_count(2, 2, traps, (0, 0), 1) == 1
    assert min_threat_count(2, 2, traps, (0, 0), 1, brute_force=True) == 1


def test_min_threats_dp_vs_brute_random():
    gen = np.random.default_rng(5)
    for _ in range(200):
        R = int(gen.integers(1, 3))
        H = int(gen.choice([1, 2, 4]))
        J = int(gen.integers(1, max(2, 8 // H) + 1))
        traps = TrapSet.from_sites(
            (int(gen.integers(-10, 11)), int(gen.integers(0, J * H + H + 1)))
            for _ in range(int(gen.integers(0, 7))))
        dp = min_threat_count(J, H, traps, (0, 0), R)
        brute = min_threat_count(J, H, traps, (0, 0), R, brute_force=True)
        assert dp == brute


def test_min_threats_at_most_any_path():
    gen = np.random.default_rng(9)
    for _ in range(100):
        H = 2
        J = 3
        traps = TrapSet.from_sites(
            (int(gen.integers(-6, 7)), int(gen.integers(0, 9)))
            for _ in range(4))
        m = min_threat_count(J, H, traps, (0, 0), 1)
        # an explicit path can only see at least that many threats
        xs = [0]
        for _ in range(J * H):
            xs.append(xs[-1] + int(gen.integers(-1, 2)))
        path = AllowedPath(0, tuple((x,) for x in xs), 1)
        assert count_threats(path, H, traps) >= m


def test_min_threats_monotone_under_shrinkage():
    traps_big = TrapSet.from_sites([(0, 1), (2, 3), (-1, 2), (1, 4)])
    traps_small = TrapSet.from_sites([(0, 1), (2, 3)])
    for J, H in ((2, 2), (4, 1)):
        assert (min_threat_count(J, H, traps_small, (0, 0), 1)
                <= min_threat_count(J, H, traps_big, (0, 0), 1))


def test_void_runs_pinned_zero():
    """Regeneration everywhere: void runs never happen."""
    cfg = RenewalConfig(mu=InterarrivalLaw.delta(0), trunc_s=8)
    rows = estimate_void_runs(cfg, ScaleLadder(0, 2), 300, 1)
    assert all(r.rate == 0.0 for r in rows)


def test_void_runs_nested_and_qk(boolean_small):
    rows = estimate_void_runs(boolean_small, ScaleLadder(0, 3), 2000, 3)
    rates = [r.rate for r in rows]
    assert all(a >= b for a, b in zip(rates, rates[1:]))  # nested events
    single = estimate_qk(2, boolean_small, 2000, 3)
    assert single.rate == rows[2].rate  # shared derivation per realization


def test_void_run_base_matches_rejection_rate(boolean_small):
    """The scale-0 void rate is one minus the regeneration-point density,
    which the block sampler's rejection statistics estimate independently."""
    from rwdelab.regen import sample_blocks
    from rwdelab.walk import state_drift_kernel

    row = estimate_qk(0, boolean_small, 4000, 77)
    blocks = sample_blocks(boolean_small, state_drift_kernel(0.1), 78, 2000)
    rejections = np.array([b.rejection_count for b in blocks])
    # rejections are geometric with success probability 1 - q0
    accept = 1.0 / (1.0 + rejections.mean())
    se = 3 * (1 - accept) / np.sqrt(len(blocks))
    assert abs((1.0 - row.rate) - accept) < se + 0.02


def test_recursion_check_structure(boolean_small):
    rows = estimate_void_runs(boolean_small, ScaleLadder(1, 3), 3000, 5)
    out = void_run_recursion_check(rows, alpha=2.0)
    assert set(out) >= {"c_hat", "c_hi", "checks", "all_passed"}
    assert len(out["checks"]) == 1
    with pytest.raises(UsageError):
        void_run_recursion_check(rows[:2], alpha=2.0)


def test_fall_on_trap_trivial_cases():
    # no balls: regeneration everywhere, the walk is trapped at once
    empty = BooleanConfig(d=1, cone_slope=1, lam=0.0,
                          radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                          rho_max=4.0)
    rows = verify_fall_on_trap(empty, lazy_srw_kernel(), 2, 2, 200, 5, 1)
    for r in rows:
        assert r.empirical == 0.0 and r.passed
        assert r.min_threats >= 1 and r.bound < 1.0


def test_fall_on_trap_inequality_holds(boolean_small):
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.3,
                        radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=16,
                        rho_max=8.0)
    rows = verify_fall_on_trap(cfg, lazy_srw_kernel(), 4, 4, 400, 20, 11)
    assert sum(r.passed for r in rows) >= 19
    assert any(r.min_threats > 0 for r in rows)


def test_threatened_box_decay():
    """Frequency of a box containing an un-threatened site decays with the
    box side at least as fast as a constant fitted at the smallest side."""
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.45,
                        radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=16,
                        rho_max=8.0)
    ka = BooleanEnv(cfg, 0).kernel_args()
    from rwdelab._kernels import bool_eta_box_bits

    alpha = 2.0
    n = 400
    freqs = {}
    for L in (8, 16, 32):
        bad = 0
        for i in range(n):
            seed = np.uint64(rng.derive(13, L, i))
            bits = bool_eta_box_bits(seed, -L, 2 * L, 0, L, cfg.trunc_s,
                                     cfg.cone_slope, *ka)
            xs, ts = np.nonzero(bits)
            covered = np.zeros(L, dtype=bool)
            for x, t in zip(xs - L, ts):
                if t <= L:
                    covered[max(0, x - t):min(L, x + t + 1)] = True
            if not covered.all():
                bad += 1
        freqs[L] = bad / n
    c_fit = freqs[8] * 8**alpha
    for L in (16, 32):
        se = 3 * np.sqrt(max(freqs[L] * (1 - freqs[L]), 1e-4) / n)
        assert freqs[L] <= c_fit * L**-alpha + se, freqs


def test_low_threat_paths_trivial():
    # regeneration everywhere: every multiple-of-H time is threatened,
    # so no path stays under the threshold when there are enough layers
    pin = BooleanConfig(d=1, cone_slope=1, lam=0.0,
                        radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                        rho_max=4.0)
    row = estimate_low_threat_paths(2, triggering_horizon(2), pin, 50, 1)
    assert row.rate == 0.0


def test_low_threat_paths_saturated():
    # a clogged environment has no regeneration points, hence no threats:
    # every path trivially stays under the threshold
    dense = BooleanConfig(d=1, cone_slope=1, lam=3.0,
                          radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                          rho_max=4.0)
    row = estimate_low_threat_paths(2, triggering_horizon(2), dense, 50, 1)
    assert row.rate == 1.0


def test_triggering_horizon():
    assert triggering_horizon(2) == 4
    assert triggering_horizon(3) == 7
    assert triggering_horizon(4) == 16
    with pytest.raises(UsageError):
        triggering_horizon(0)


def test_trapset_from_realization_paths_agree(boolean_small):
    from rwdelab.regen import make_env

    env = make_env(boolean_small, 31)
    window = box1d(-3, 3, 0, 4)
    fast = TrapSet.from_env_realization(env, window)
    slow = TrapSet.from_sites(
        z for z in window.sites() if env.eta_s(z) == 1)
    assert fast.sites == slow.sites
    if len(fast):
        x, t = next(iter(fast.sites))
        assert fast.contains(x[0], t)
