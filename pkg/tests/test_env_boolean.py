import math

import numpy as np
import pytest

from rwdelab import _kernels as K
from rwdelab import rng
from rwdelab.envs.boolean import (
    BallRecord,
    BooleanConfig,
    BooleanEnv,
    RadiusLaw,
    ball_crosses_cone_lattice,
    ball_meets_cone_hull,
    eta_s_at,
    omega_at,
    sample_balls,
)
from rwdelab.lattice import Site, UsageError, box1d, cone_contains


def test_radius_law_validation():
    with pytest.raises(UsageError):
        RadiusLaw.pareto(0.0, 4.0)
    with pytest.raises(UsageError):
        BooleanConfig(d=1, cone_slope=1, lam=0.1,
                      radius_law=RadiusLaw.pareto(1.0, 1.5), trunc_s=8, rho_max=8)
    law = RadiusLaw.pareto(1.0, 4.0)
    assert law.survival(0.5) == 1.0
    assert law.survival(2.0) == pytest.approx(2.0**-4)
    assert law.sample(0.0) == 1.0
    det = RadiusLaw.deterministic(0.5)
    assert det.survival(0.4) == 1.0 and det.survival(0.6) == 0.0


def test_sample_balls_determinism_and_consistency(boolean_small):
    w1 = box1d(-2, 2, -2, 2)
    w2 = box1d(0, 4, -1, 3)
    b1 = sample_balls(w1, boolean_small, 5)
    assert b1 == sample_balls(w1, boolean_small, 5)
    cell = lambda b: (math.floor(b.center[0]), math.floor(b.center[1]))
    in_both = {(0, -1), (0, 0), (1, 0)}
    s1 = {(b.center, b.radius) for b in b1 if cell(b) in in_both}
    s2 = {(b.center, b.radius) for b in sample_balls(w2, boolean_small, 5)
          if cell(b) in in_both}
    assert s1 == s2
    assert sample_balls(None, boolean_small, 5) == []


def test_cell_poisson_moments(boolean_small):
    counts = np.array([K.cell_count(np.uint64(s), 0, 0, 1.0) for s in range(100_000)])
    assert abs(counts.mean() - 1.0) < 0.02
    assert abs(counts.var() - 1.0) < 0.05


def test_omega_examples():
    # isolated seed with no nearby balls
    empty = BooleanConfig(d=1, cone_slope=1, lam=0.0,
                          radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8, rho_max=4)
    assert omega_at(Site((0,), 0), empty, 1) == 0
    assert eta_s_at(Site((0,), 0), empty, 1) == 1
    # a ball containing its center covers the site
    env = BooleanEnv(
        BooleanConfig(d=1, cone_slope=1, lam=0.2,
                      radius_law=RadiusLaw.deterministic(0.5), trunc_s=8, rho_max=4),
        9)
    ball = BallRecord((0.0, 0.0), 0.5)
    assert ball_crosses_cone_lattice(ball, Site((0,), 0), 1, "future")
    assert ball_crosses_cone_lattice(ball, Site((0,), 0), 1, "past")


def test_void_probability_deterministic_radius():
    """P(site vacant) = exp(-lam * pi * rho^2) for a fixed radius."""
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.2,
                        radius_law=RadiusLaw.deterministic(0.5), trunc_s=8, rho_max=4)
    ka = BooleanEnv(cfg, 0).kernel_args()
    n = 100_000
    vac = sum(int(K.bool_omega(np.uint64(rng.derive(6, i)), 0, 0, *ka) == 0)
              for i in range(n))
    target = math.exp(-0.2 * math.pi * 0.25)
    se = math.sqrt(target * (1 - target) / n)
    assert abs(vac / n - target) < 3 * se


def _oracle_crosses(ball, z, slope, direction):
    (bx, bt), rho = ball.center, ball.radius
    for x in range(math.floor(bx - rho) - 1, math.ceil(bx + rho) + 2):
        for t in range(math.floor(bt - rho) - 1, math.ceil(bt + rho) + 2):
            if (x - bx) ** 2 + (t - bt) ** 2 < rho**2 and cone_contains(
                    z, Site((x,), t), slope, direction):
                return True
    return False


def test_crossing_predicate_vs_exhaustive_scan():
    gen = np.random.default_rng(7)
    for _ in range(1500):
        ball = BallRecord((float(gen.uniform(-6, 6)), float(gen.uniform(-6, 6))),
                          float(gen.uniform(0.05, 5.0)))
        z = Site((int(gen.integers(-3, 4)),), int(gen.integers(-3, 4)))
        slope = int(gen.integers(1, 4))
        for direction in ("future", "past"):
            got = ball_crosses_cone_lattice(ball, z, slope, direction)
            assert got == _oracle_crosses(ball, z, slope, direction)
            assert got == bool(K.ball_crosses_cone(
                ball.center[0], ball.center[1], ball.radius, z.x[0], z.t, slope,
                direction == "future"))


def test_crossing_spec_examples():
    # a ball around the apex meets both cones through the apex itself
    assert K.ball_crosses_both(0.0, 0.0, 0.6, 0, 0, 1) == 1
    # strictly-future ball far from the cone axis cannot meet the past cone
    far = BallRecord((50.0, 10.0), 1.0)
    assert not ball_crosses_cone_lattice(far, Site((0,), 0), 2, "past")
    # contains (0,0) in the past cone and (0,1) in the future cone
    assert K.ball_crosses_both(0.0, 0.5, 1.2, 0, 0, 1) == 1


def test_eta_kernel_parity(boolean_small):
    ka = BooleanEnv(boolean_small, 0).kernel_args()
    for seed in range(30):
        env = BooleanEnv(boolean_small, seed)
        py = env.eta_s(Site((0,), 0))
        nb = K.bool_eta(np.uint64(seed), 0, 0, boolean_small.trunc_s,
                        boolean_small.cone_slope, *ka)
        assert py == nb
        assert env.omega(Site((1,), -1)) == K.bool_omega(np.uint64(seed), 1, -1, *ka)


def test_eta_implies_vacant_with_coherent_cap(boolean_small):
    # trunc_s >= 2 rho_max: any ball containing the site lies in the window
    assert boolean_small.trunc_s >= 2 * boolean_small.rho_max
    hits = 0
    for seed in range(300):
        env = BooleanEnv(boolean_small, seed)
        if env.eta_s(Site((0,), 0)) == 1:
            hits += 1
            assert env.omega(Site((0,), 0)) == 0
    assert hits > 50


def test_truncation_monotone_in_s(boolean_small):
    cfg = BooleanConfig(d=1, cone_slope=1, lam=0.1,
                        radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=32, rho_max=16)
    ka = BooleanEnv(cfg, 0).kernel_args()
    for seed in range(200):
        es, e2s = K.bool_trunc_pair(np.uint64(seed), 8, 1, *ka)
        assert e2s <= es  # widening the window can only reveal more balls


def test_translation_covariance():
    base_cfg = BooleanConfig(d=1, cone_slope=1, lam=0.2,
                             radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                             rho_max=4.0)
    moved_cfg = BooleanConfig(d=1, cone_slope=1, lam=0.2,
                              radius_law=RadiusLaw.pareto(1.0, 4.0), trunc_s=8,
                              rho_max=4.0, origin=(2, -1))
    base = BooleanEnv(base_cfg, 21)
    moved = BooleanEnv(moved_cfg, 21)
    for x in range(-2, 3):
        for t in range(-2, 3):
            assert base.omega(Site((x,), t)) == moved.omega(Site((x + 2,), t - 1))
            assert base.eta_s(Site((x,), t)) == moved.eta_s(Site((x + 2,), t - 1))


def test_hull_mode_is_weaker():
    """Lattice-point crossing implies hull intersection (never conversely)."""
    gen = np.random.default_rng(3)
    strictly_weaker = 0
    for _ in range(800):
        ball = BallRecord((float(gen.uniform(-4, 4)), float(gen.uniform(-4, 4))),
                          float(gen.uniform(0.05, 3.0)))
        z = Site((0,), 0)
        for direction in ("future", "past"):
            lattice = ball_crosses_cone_lattice(ball, z, 1, direction)
            hull = ball_meets_cone_hull(ball, z, 1, direction)
            if lattice:
                assert hull
            elif hull:
                strictly_weaker += 1
    assert strictly_weaker > 0


def test_truncation_bias_report(boolean_small):
    note = boolean_small.truncation_bias_note()
    assert note["thinned_tail_mass"] == pytest.approx(8.0**-4)
    assert note["window_s"] == boolean_small.trunc_s
    assert boolean_small.tail_exponent == pytest.approx(2.0)
