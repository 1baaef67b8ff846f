"""Regeneration blocks and the two-route limit estimators.

A block is sampled by drawing fresh environments until the origin is a
regeneration point (rejection realizes the conditioned law), then walking
until the trajectory hits the next regeneration point.  Blocks sampled on
independent environments are i.i.d. by construction; the ratio of their
means estimates the speed and their centered covariance the limiting
Gaussian covariance.  direct_run() provides the independent cross-check:
plain unconditioned simulations whose terminal statistics must agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import rng
from ._kernels import bool_blocks, bool_direct_finals, ren_blocks, ren_direct_finals
from .envs.base import CensoredError
from .envs.boolean import BooleanConfig, BooleanEnv
from .envs.renewal import RenewalConfig, RenewalEnv
from .lattice import Site, UsageError
from .walk import JumpKernel, jump, site_uniform

PSD_TOL = 1e-9


class AcceptanceError(RuntimeError):
    """Rejection sampling exceeded its cap; the conditioned event is too rare."""


def make_env(env_config, seed: int):
    if isinstance(env_config, RenewalConfig):
        return RenewalEnv(env_config, seed)
    if isinstance(env_config, BooleanConfig):
        return BooleanEnv(env_config, seed)
    raise UsageError(f"unknown environment config {type(env_config).__name__}")


@dataclass(frozen=True)
class RegenerationBlock:
    """One i.i.d. block: time to the next regeneration point and the walk
    displacement there, plus the rejection bookkeeping."""

    duration: int
    disp: Tuple[int, ...]
    censored: bool
    rejection_count: int
    seed_used: int

    def __post_init__(self):
        if self.duration < 0:
            raise UsageError("block duration must be nonnegative")


def sample_block(env_config, kernel: JumpKernel, seed: int,
                 max_rejections: int = 100_000) -> RegenerationBlock:
    """Reference (pure python) block sampler; works in any dimension."""
    horizon = env_config.horizon if hasattr(env_config, "horizon") else 100_000
    d = env_config.d
    origin = Site((0,) * d, 0)
    for rej in range(max_rejections):
        env_seed = rng.derive(seed, rej)
        env = make_env(env_config, env_seed)
        if env.eta_s(origin) != 1:
            continue
        walk_seed = rng.derive(env_seed, rng.TAG_WALK_U, 0)
        here = origin
        for t in range(horizon):
            state = env.omega(here)
            u = site_uniform(here, walk_seed)
            dy = jump(kernel, state, u)
            here = Site(tuple(a + b for a, b in zip(here.x, dy)), here.t + 1)
            if env.eta_s(here) == 1:
                return RegenerationBlock(here.t, here.x, False, rej, seed)
        return RegenerationBlock(horizon, here.x, True, rej, seed)
    raise AcceptanceError(
        f"no regeneration at the origin within {max_rejections} environment draws"
    )


def sample_blocks(env_config, kernel: JumpKernel, seed: int, n: int,
                  max_rejections: int = 100_000,
                  start: int = 0) -> List[RegenerationBlock]:
    """Blocks for indices [start, start+n); block i draws its seeds from
    derive(seed, i), so extending a run never perturbs earlier blocks and
    disjoint index ranges can be sampled in parallel.  Uses the compiled
    d=1 drivers when available."""
    if n < 0:
        raise UsageError("n must be nonnegative")
    if env_config.d == 1:
        kargs = kernel.kernel_args()
        if isinstance(env_config, RenewalConfig):
            t1, disp, cens, rej, status = ren_blocks(
                np.uint64(seed & rng.U64), start, n, env_config.trunc_s,
                env_config.cone_slope, env_config.horizon, max_rejections,
                *RenewalEnv(env_config, 0).kernel_args(), *kargs)
        else:
            horizon = getattr(env_config, "horizon", 100_000)
            t1, disp, cens, rej, status = bool_blocks(
                np.uint64(seed & rng.U64), start, n, env_config.trunc_s,
                env_config.cone_slope, horizon, max_rejections,
                *BooleanEnv(env_config, 0).kernel_args(), *kargs)
        if np.any(status == 1):
            raise AcceptanceError("acceptance cap hit while sampling blocks")
        if np.any(status == 2):
            raise CensoredError("censored environment query while sampling blocks")
        return [
            RegenerationBlock(int(t1[i]), (int(disp[i]),), bool(cens[i]),
                              int(rej[i]), seed)
            for i in range(n)
        ]
    return [sample_block(env_config, kernel, rng.derive(seed, start + i), max_rejections)
            for i in range(n)]


@dataclass
class LimitEstimates:
    """Speed and limiting covariance from i.i.d. blocks, with bootstrap CIs."""

    speed: np.ndarray  # (d,)
    clt_cov: np.ndarray  # (d, d), symmetric PSD
    speed_ci: Tuple[np.ndarray, np.ndarray]
    cov_ci: Tuple[np.ndarray, np.ndarray]
    n_blocks: int
    n_censored: int
    mean_duration: float

    def speed_halfwidth(self) -> np.ndarray:
        return 0.5 * (self.speed_ci[1] - self.speed_ci[0])


def _point_estimates(t1: np.ndarray, disp: np.ndarray):
    v = disp.sum(axis=0) / t1.sum()
    resid = disp - np.outer(t1, v)
    if resid.shape[0] > 1:
        cov = np.atleast_2d(np.cov(resid, rowvar=False, ddof=1)) / t1.mean()
    else:
        cov = np.zeros((disp.shape[1], disp.shape[1]))
    return v, cov


def _point_estimates_exact(t1: np.ndarray, disp: np.ndarray):
    """Exactly-rounded sums make the point estimates independent of block
    order, bit for bit."""
    import math

    n, d = disp.shape
    t_sum = math.fsum(t1)
    v = np.array([math.fsum(disp[:, j]) / t_sum for j in range(d)])
    resid = disp - np.outer(t1, v)
    cov = np.zeros((d, d))
    if n > 1:
        mean_r = np.array([math.fsum(resid[:, j]) / n for j in range(d)])
        centered = resid - mean_r
        for i in range(d):
            for j in range(i, d):
                cov[i, j] = cov[j, i] = math.fsum(centered[:, i] * centered[:, j]) / (n - 1)
        cov /= t_sum / n
    return v, cov


def estimate_limits(blocks: Sequence[RegenerationBlock], n_boot: int = 2000,
                    boot_seed: int = 0) -> LimitEstimates:
    """Ratio-of-means speed and centered block covariance over mean duration.

    Censored blocks are excluded from the point estimates but reported.
    Percentile bootstrap over blocks gives the confidence intervals.
    """
    live = [b for b in blocks if not b.censored]
    if len(live) < 2:
        raise UsageError("need at least 2 uncensored blocks")
    t1 = np.array([b.duration for b in live], dtype=np.float64)
    disp = np.array([b.disp for b in live], dtype=np.float64)
    v, cov = _point_estimates_exact(t1, disp)
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    if eig.min() < -PSD_TOL:
        raise AssertionError(f"covariance estimate not PSD: min eigenvalue {eig.min()}")
    cov = _clip_psd(cov)

    gen = np.random.default_rng(rng.derive(boot_seed, rng.TAG_BOOT))
    n = len(live)
    d = disp.shape[1]
    v_samples = np.empty((n_boot, d))
    c_samples = np.empty((n_boot, d, d))
    for b in range(n_boot):
        idx = gen.integers(0, n, n)
        vb, cb = _point_estimates(t1[idx], disp[idx])
        v_samples[b] = vb
        c_samples[b] = cb
    v_lo = np.quantile(v_samples, 0.025, axis=0)
    v_hi = np.quantile(v_samples, 0.975, axis=0)
    c_lo = np.quantile(c_samples, 0.025, axis=0)
    c_hi = np.quantile(c_samples, 0.975, axis=0)
    return LimitEstimates(
        speed=v, clt_cov=cov, speed_ci=(v_lo, v_hi), cov_ci=(c_lo, c_hi),
        n_blocks=len(blocks), n_censored=len(blocks) - len(live),
        mean_duration=float(t1.mean()),
    )


def _clip_psd(cov: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(cov)
    return (q * np.clip(w, 0.0, None)) @ q.T


@dataclass
class DirectRunResult:
    finals: np.ndarray  # (n_runs, d) terminal positions
    t_final: int

    def ratios(self) -> np.ndarray:
        return self.finals / self.t_final

    def standardized(self, speed: np.ndarray) -> np.ndarray:
        return (self.finals - self.t_final * np.asarray(speed)) / np.sqrt(self.t_final)


def direct_run(env_config, kernel: JumpKernel, t_final: int, n_runs: int,
               seed: int) -> DirectRunResult:
    """Unconditioned simulations: n_runs independent (environment, walk)
    pairs evolved for t_final steps."""
    if t_final < 0 or n_runs < 1:
        raise UsageError("need t_final >= 0 and n_runs >= 1")
    if env_config.d == 1:
        kargs = kernel.kernel_args()
        if isinstance(env_config, RenewalConfig):
            finals, ok = ren_direct_finals(
                np.uint64(seed & rng.U64), n_runs, t_final,
                *RenewalEnv(env_config, 0).kernel_args(), *kargs)
            if not np.all(ok):
                raise CensoredError("censored environment query in a direct run")
        else:
            finals = bool_direct_finals(
                np.uint64(seed & rng.U64), n_runs, t_final,
                *BooleanEnv(env_config, 0).kernel_args(), *kargs)
        return DirectRunResult(finals.reshape(-1, 1).astype(np.float64), t_final)
    finals = np.empty((n_runs, env_config.d))
    from .walk import simulate

    for i in range(n_runs):
        env = make_env(env_config, rng.derive(seed, i))
        walk_seed = rng.derive(rng.derive(seed, i), rng.TAG_WALK_U, 0)
        traj = simulate(Site((0,) * env_config.d, 0), t_final, env, kernel, walk_seed)
        finals[i] = traj.final().x
    return DirectRunResult(finals, t_final)


def trajectory_regen_diagnostic(env_config, kernel: JumpKernel, seed: int,
                                n_hits: int, horizon: int = 50_000) -> dict:
    """Successive regeneration hits along ONE trajectory, without the
    fresh-environment resampling.

    These increments are NOT guaranteed i.i.d. (the i.i.d. theorem needs
    field resampling between hits); the returned lag-1 correlation of the
    inter-hit times quantifies how non-i.i.d. they are.
    """
    env = make_env(env_config, rng.derive(seed, 0))
    walk_seed = rng.derive(rng.derive(seed, 0), rng.TAG_WALK_U, 0)
    d = env_config.d
    here = Site((0,) * d, 0)
    hits = []
    for t in range(horizon):
        state = env.omega(here)
        u = site_uniform(here, walk_seed)
        dy = jump(kernel, state, u)
        here = Site(tuple(a + b for a, b in zip(here.x, dy)), here.t + 1)
        if env.eta_s(here) == 1:
            hits.append((here.t, here.x))
            if len(hits) >= n_hits:
                break
    durations = np.diff([0] + [h[0] for h in hits])
    lag1 = float(np.corrcoef(durations[:-1], durations[1:])[0, 1]) if len(durations) > 2 else float("nan")
    return {
        "hits": hits,
        "durations": durations.tolist(),
        "lag1_correlation": lag1,
        "note": "single-trajectory increments without resampling; not guaranteed i.i.d.",
    }


def blocks_to_arrays(blocks: Sequence[RegenerationBlock]):
    t1 = np.array([b.duration for b in blocks], dtype=np.int64)
    disp = np.array([b.disp for b in blocks], dtype=np.int64)
    cens = np.array([b.censored for b in blocks], dtype=bool)
    rej = np.array([b.rejection_count for b in blocks], dtype=np.int64)
    return t1, disp, cens, rej
