"""Renormalization diagnostics: void runs, threatened points, path DP.

The objects here quantify how quickly a walk must meet regeneration
points: void-run probabilities over vertical segments at geometric
scales, the threatened-site calculus, and the dynamic program for the
minimum number of well-separated threats along any range-R path, which
exponentiates into the fall-on-trap bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import rng
from ._kernels import (
    bool_eta_box_bits,
    bool_first_regen_on_column,
    bool_occupancy_grid,
    fall_on_trap_walks,
    min_threats_brute,
    min_threats_dp,
    ren_first_regen_on_column,
)
from .envs.boolean import BooleanConfig, BooleanEnv
from .envs.renewal import RenewalConfig, RenewalEnv
from .lattice import AllowedPath, Box, Site, UsageError
from .stattests import wilson_ci
from .walk import JumpKernel


class ResourceError(RuntimeError):
    """The requested window would exceed the configured memory budget."""


DP_CELL_BUDGET = 50_000_000


@dataclass(frozen=True)
class ScaleLadder:
    """Geometric scales L_k = 4**k for k in [k_min, k_max]."""

    k_min: int
    k_max: int

    def __post_init__(self):
        if self.k_min < 0 or self.k_max < self.k_min:
            raise UsageError("need 0 <= k_min <= k_max")

    def scale(self, k: int) -> int:
        if not self.k_min <= k <= self.k_max:
            raise UsageError(f"k={k} outside ladder [{self.k_min}, {self.k_max}]")
        return 4**k

    def ks(self) -> range:
        return range(self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class TrapSet:
    """A fixed collection of space-time trap sites (d = 1: ((x,), t))."""

    sites: frozenset

    @staticmethod
    def from_sites(sites: Iterable) -> "TrapSet":
        out = set()
        for s in sites:
            if isinstance(s, Site):
                out.add((s.x, s.t))
            else:
                x, t = s
                x = (int(x),) if isinstance(x, (int, np.integer)) else tuple(int(v) for v in x)
                out.add((x, int(t)))
        return TrapSet(frozenset(out))

    @staticmethod
    def from_env_realization(env, window: Box) -> "TrapSet":
        """Materialize the regeneration sites of one realization over a
        window; membership is deterministic per (config, seed)."""
        if isinstance(env, BooleanEnv) and env.d == 1:
            bits, _ = _bool_eta_bits(env, window)
            xs, ts = np.nonzero(bits)
            return TrapSet(frozenset(
                ((int(x + window.lo[0]),), int(t + window.lo[1])) for x, t in zip(xs, ts)
            ))
        return TrapSet(frozenset(
            (z.x, z.t) for z in window.sites() if env.eta_s(z) == 1
        ))

    def contains(self, x, t: int) -> bool:
        x = (int(x),) if isinstance(x, (int, np.integer)) else tuple(int(v) for v in x)
        return (x, t) in self.sites

    def arrays_1d(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.array([s[0][0] for s in sorted(self.sites)], dtype=np.int64)
        ts = np.array([s[1] for s in sorted(self.sites)], dtype=np.int64)
        return xs, ts

    def __len__(self) -> int:
        return len(self.sites)


def _bool_eta_bits(env: BooleanEnv, window: Box):
    cfg = env.config
    return bool_eta_box_bits(
        np.uint64(env.seed & rng.U64), window.lo[0], window.hi[0],
        window.lo[1], window.hi[1], cfg.trunc_s, cfg.cone_slope,
        *env.kernel_args(),
    ), None


def is_threatened(z: Site, horizon: int, traps: TrapSet) -> bool:
    """A site is threatened when a slope-1 path of length <= horizon from
    it passes through a trap: some trap (x', t') has z.t <= t' <= z.t +
    horizon and |x' - z.x|_inf <= t' - z.t."""
    if horizon < 1:
        raise UsageError("threat horizon must be >= 1")
    for (x, t) in traps.sites:
        dt = t - z.t
        if 0 <= dt <= horizon and max(abs(a - b) for a, b in zip(x, z.x)) <= dt:
            return True
    return False


def count_threats(path: AllowedPath, horizon: int, traps: TrapSet) -> int:
    """Threatened path sites at absolute times that are multiples of the
    horizon (spacing keeps the trap-hitting attempts independent)."""
    from .lattice import validate_allowed_path

    if not validate_allowed_path(path):
        raise UsageError("path does not validate against its Lipschitz constant")
    count = 0
    for k in range(path.length + 1):
        z = path.site_at(k)
        if z.t % horizon == 0 and is_threatened(z, horizon, traps):
            count += 1
    return count


def min_threat_count(J: int, H: int, traps: TrapSet, start_region: Tuple[int, int],
                     jump_range: int, brute_force: bool = False,
                     path_length: Optional[int] = None) -> int:
    """Minimum of count_threats over all range-R paths of length J*H (or
    path_length) starting at time 0 in the spatial interval start_region.

    Computed by backward DP over time layers; brute_force enumerates all
    step sequences instead (exponential; oracle use only).
    """
    if H < 1 or jump_range < 1:
        raise UsageError("need H >= 1 and jump_range >= 1")
    T = J * H if path_length is None else path_length
    if T < 0:
        raise UsageError("path length must be nonnegative")
    lo, hi = int(start_region[0]), int(start_region[1])
    if lo > hi:
        raise UsageError("empty start region")
    width = (hi - lo + 1) + 2 * jump_range * T
    if width * (T + 1) > DP_CELL_BUDGET:
        raise ResourceError(
            f"DP window of {width}x{T + 1} cells exceeds the budget {DP_CELL_BUDGET}"
        )
    tx, tt = traps.arrays_1d()
    if brute_force:
        if (2 * jump_range + 1) ** T > 10_000_000:
            raise ResourceError("brute force enumeration too large")
        return int(min_threats_brute(tx, tt, T, H, jump_range, lo, hi))
    return int(min_threats_dp(tx, tt, T, H, jump_range, lo, hi))


# ------------------------------------------------------------- void runs


@dataclass
class VoidRunRow:
    k: int
    scale: int
    n: int
    hits: int
    rate: float
    ci_lo: float
    ci_hi: float


def void_run_firsts(env_config, L_max: int, n: int, seed: int,
                    start: int = 0) -> np.ndarray:
    """First regeneration index on the origin column, for realizations
    [start, start+n); L_max marks scans that saw none."""
    firsts = np.empty(n, dtype=np.int64)
    if isinstance(env_config, BooleanConfig) and env_config.d == 1:
        kargs = BooleanEnv(env_config, 0).kernel_args()
        for i in range(n):
            firsts[i] = bool_first_regen_on_column(
                _child_seed(seed, start + i), L_max, env_config.trunc_s,
                env_config.cone_slope, *kargs)
    elif isinstance(env_config, RenewalConfig) and env_config.d == 1:
        kargs = RenewalEnv(env_config, 0).kernel_args()
        for i in range(n):
            first = ren_first_regen_on_column(
                _child_seed(seed, start + i), L_max, env_config.trunc_s,
                env_config.cone_slope, *kargs)
            if first < 0:
                raise RuntimeError("censored chain query during void-run scan")
            firsts[i] = first
    else:
        for i in range(n):
            env = _make_env(env_config, rng.derive(seed, start + i))
            firsts[i] = L_max
            for tau in range(L_max):
                if env.eta_s(Site((0,) * env_config.d, tau)) == 1:
                    firsts[i] = tau
                    break
    return firsts


def estimate_void_runs(env_config, ladder: ScaleLadder, n: int, seed: int,
                       firsts: Optional[np.ndarray] = None) -> List[VoidRunRow]:
    """Probability of an all-zero regeneration column of length 4**k, for
    every k of the ladder on shared realizations.

    Shared sampling makes the estimates exactly monotone in k (the events
    are nested) and lets one column scan serve the whole ladder.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    L_max = ladder.scale(ladder.k_max)
    if firsts is None:
        firsts = void_run_firsts(env_config, L_max, n, seed)
    rows = []
    for k in ladder.ks():
        L = ladder.scale(k)
        hits = int(np.count_nonzero(firsts >= L))
        lo, hi = wilson_ci(hits, n)
        rows.append(VoidRunRow(k, L, n, hits, hits / n, lo, hi))
    return rows


def _child_seed(seed: int, i: int) -> np.uint64:
    return np.uint64(rng.derive(int(seed), i))


def _make_env(env_config, seed):
    from .regen import make_env

    return make_env(env_config, seed)


def estimate_qk(k: int, env_config, n: int, seed: int) -> VoidRunRow:
    """Single-scale void-run estimate with a Wilson interval."""
    return estimate_void_runs(env_config, ScaleLadder(k, k), n, seed)[0]


def void_run_recursion_check(rows: Sequence[VoidRunRow], alpha: float) -> dict:
    """Test rate_{k+1} <= rate_k^2 + c * scale_k^-alpha with c fitted at
    the smallest ladder scale and then held fixed.

    The fitted constant uses the upper CI of the first gap; each later
    inequality passes when the lower CI of the left side stays below the
    upper-CI right side.
    """
    if len(rows) < 3:
        raise UsageError("need at least three ladder scales for the recursion check")
    base, nxt = rows[0], rows[1]
    c_hat = max(0.0, (nxt.rate - base.rate**2) * base.scale**alpha)
    c_hi = max(0.0, (nxt.ci_hi - max(base.ci_lo, 0.0) ** 2) * base.scale**alpha)
    checks = []
    for a, b in zip(rows[1:-1], rows[2:]):
        bound = a.ci_hi**2 + c_hi * a.scale ** (-alpha)
        checks.append({
            "k": a.k,
            "lhs_rate": b.rate,
            "lhs_ci_lo": b.ci_lo,
            "rhs_bound": bound,
            "passed": bool(b.ci_lo <= bound),
        })
    return {"c_hat": c_hat, "c_hi": c_hi, "alpha": alpha, "checks": checks,
            "all_passed": all(c["passed"] for c in checks)}


# ------------------------------------------------------- fall-on-trap bound


@dataclass
class FallOnTrapRow:
    realization: int
    min_threats: int
    bound: float
    empirical: float
    se: float
    n_walks: int
    passed: bool


def verify_fall_on_trap(env_config: BooleanConfig, kernel: JumpKernel, J: int, H: int,
                        n_walks: int, n_realizations: int, seed: int) -> List[FallOnTrapRow]:
    """Per fixed realization: estimate the no-trap-hit probability through
    time J*H over walk noise and compare with (1 - floor**H)**M.

    Traps are the realization's regeneration sites; the inequality holds
    for the exact probability, so the empirical side may exceed the bound
    only by sampling noise (3 SE is the acceptance slack).
    """
    if env_config.d != 1:
        raise UsageError("fall-on-trap driver supports d = 1 only")
    R = kernel.jump_range
    T = J * H
    kappa = kernel.ellipticity_floor()
    kargs = BooleanEnv(env_config, 0).kernel_args()
    kkeys, krows, kdefault, kdisp = kernel.kernel_args()
    x_lo, x_hi = -R * T - H, R * T + H
    t_lo, t_hi = 0, T + H
    rows = []
    for i in range(n_realizations):
        env_seed = _child_seed(seed, i)
        bits = bool_eta_box_bits(env_seed, x_lo, x_hi, t_lo, t_hi,
                                 env_config.trunc_s, env_config.cone_slope, *kargs)
        txs, tts = np.nonzero(bits)
        tx = (txs + x_lo).astype(np.int64)
        tt = (tts + t_lo).astype(np.int64)
        m = int(min_threats_dp(tx, tt, T, H, R, 0, 0))
        bound = (1.0 - kappa**H) ** m
        grid = bool_occupancy_grid(env_seed, x_lo, x_hi, t_lo, t_hi, *kargs)
        walk_seed = _child_seed(int(env_seed), rng.TAG_WALK_U)
        survived = int(fall_on_trap_walks(walk_seed, n_walks, T, bits, grid,
                                          x_lo, t_lo, kkeys, krows, kdefault, kdisp))
        p_hat = survived / n_walks
        se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n_walks)
        rows.append(FallOnTrapRow(i, m, bound, p_hat, se, n_walks,
                                  p_hat <= bound + 3.0 * se))
    return rows


# --------------------------------------------- low-threat-path event rates


@dataclass
class LowThreatRow:
    k: int
    scale: int
    horizon: int
    threshold: int
    n: int
    hits: int
    rate: float
    ci_lo: float
    ci_hi: float


def triggering_horizon(k: int) -> int:
    """The scale-matched threat horizon floor(4**k / k**2)."""
    if k < 1:
        raise UsageError("k must be >= 1")
    return max(1, (4**k) // (k * k))


def estimate_low_threat_paths(k: int, H: int, env_config: BooleanConfig, n: int,
                              seed: int) -> LowThreatRow:
    """Frequency of realizations admitting a range-R path of length 4**k - 1
    from the base row whose H-spaced threat count stays below k**2.

    Evaluated by the same DP as min_threat_count, started from the whole
    base row; the event reads the regeneration field on a padded box.
    """
    if env_config.d != 1:
        raise UsageError("low-threat-path driver supports d = 1 only")
    L = 4**k
    R = env_config.cone_slope
    T = L - 1
    width = L + 2 * R * T + 2 * (H + 1)
    if width * (T + H + 2) > DP_CELL_BUDGET:
        raise ResourceError(f"scale k={k} window exceeds the cell budget")
    kargs = BooleanEnv(env_config, 0).kernel_args()
    x_lo, x_hi = -R * T - H, L - 1 + R * T + H
    t_lo, t_hi = 0, T + H
    hits = 0
    for i in range(n):
        env_seed = _child_seed(seed, i)
        bits = bool_eta_box_bits(env_seed, x_lo, x_hi, t_lo, t_hi,
                                 env_config.trunc_s, env_config.cone_slope, *kargs)
        txs, tts = np.nonzero(bits)
        tx = (txs + x_lo).astype(np.int64)
        tt = (tts + t_lo).astype(np.int64)
        m = int(min_threats_dp(tx, tt, T, H, R, 0, L - 1))
        if m < k * k:
            hits += 1
    lo, hi = wilson_ci(hits, n)
    return LowThreatRow(k, L, H, k * k, n, hits, hits / n, lo, hi)
