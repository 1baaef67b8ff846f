"""Walk engine: jump kernels, per-site uniforms, coupled trajectories.

The walk reads the environment state at its current site, draws the
site's uniform, and jumps by the displacement whose half-open kernel
interval contains the uniform.  Because uniforms are attached to sites
rather than to walkers, two walks that meet at a site at the same time
coincide forever after.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import rng
from .lattice import AllowedPath, Site, UsageError, validate_allowed_path


def displacement_table(d: int, jump_range: int) -> Tuple[Tuple[int, ...], ...]:
    """All displacements in the centered sup-norm ball, lexicographic."""
    return tuple(itertools.product(range(-jump_range, jump_range + 1), repeat=d))


@dataclass(frozen=True)
class JumpKernel:
    """Per-state jump laws on the centered sup-norm ball of the given range.

    `rows` carries explicit states; every other state uses `default_row`.
    Each row is a pmf over displacement_table(d, jump_range) in
    lexicographic order.  The ellipticity floor is the smallest
    probability that any state gives to any nearest-neighbor-or-stay
    displacement; the constructor rejects a zero floor.
    """

    d: int
    jump_range: int
    rows: Tuple[Tuple[int, Tuple[float, ...]], ...]  # (state, pmf) pairs
    default_row: Tuple[float, ...]
    name: str = "custom"
    enforce_elliptic: bool = True  # opt-out only for degenerate null controls

    def __post_init__(self):
        m = (2 * self.jump_range + 1) ** self.d
        for pmf in [r for _, r in self.rows] + [self.default_row]:
            if len(pmf) != m:
                raise UsageError(f"kernel row has {len(pmf)} entries, expected {m}")
            if abs(sum(pmf) - 1.0) > 1e-12:
                raise UsageError("kernel row does not sum to 1 within 1e-12")
            if min(pmf) < 0:
                raise UsageError("kernel row has negative entries")
        if self.enforce_elliptic and self.ellipticity_floor() <= 0.0:
            raise UsageError("kernel is not uniformly elliptic (zero floor)")

    def row_for(self, state: int) -> Tuple[float, ...]:
        for s, pmf in self.rows:
            if s == state:
                return pmf
        return self.default_row

    def ellipticity_floor(self) -> float:
        """min over nearest-neighbor-or-stay displacements, inf over states."""
        table = displacement_table(self.d, self.jump_range)
        near = [i for i, y in enumerate(table) if max(abs(c) for c in y) <= 1]
        floor = 1.0
        for _, pmf in list(self.rows) + [(None, self.default_row)]:
            floor = min(floor, min(pmf[i] for i in near))
        return floor

    def cdf_for(self, state: int) -> np.ndarray:
        return rng.pmf_to_cdf(np.asarray(self.row_for(state)))

    def kernel_args(self):
        """Packed arrays for the compiled drivers (d = 1)."""
        if self.d != 1:
            raise UsageError("compiled walk drivers support d = 1 only")
        m = 2 * self.jump_range + 1
        pairs = sorted(self.rows, key=lambda sp: sp[0])
        keys = np.array([s for s, _ in pairs], dtype=np.int64)
        rows = np.zeros((len(pairs), m), dtype=np.float64)
        for i, (_, pmf) in enumerate(pairs):
            rows[i] = rng.pmf_to_cdf(np.asarray(pmf))
        default = rng.pmf_to_cdf(np.asarray(self.default_row))
        disp = np.array([y[0] for y in displacement_table(1, self.jump_range)],
                        dtype=np.int64)
        return keys, rows, default, disp


def jump(kernel: JumpKernel, state: int, u: float) -> Tuple[int, ...]:
    """Displacement whose half-open cumulative interval contains u."""
    if not 0.0 <= u < 1.0:
        raise UsageError(f"uniform {u} outside [0, 1)")
    idx = rng.sample_cdf(kernel.cdf_for(state), u)
    return displacement_table(kernel.d, kernel.jump_range)[idx]


def site_uniform(z: Site, seed: int) -> float:
    """The i.i.d.-in-law uniform attached to site z under this seed."""
    return rng.u01(seed, rng.TAG_WALK_U, *z.x, z.t, 0)


def state_drift_kernel(kappa: float = 0.1) -> JumpKernel:
    """d=1 demo kernel: drifts right on empty sites, left on occupied ones."""
    if not 0.0 < kappa < 0.5:
        raise UsageError("kappa must lie in (0, 0.5)")
    right = (kappa, kappa, 1.0 - 2.0 * kappa)
    left = (1.0 - 2.0 * kappa, kappa, kappa)
    return JumpKernel(1, 1, ((0, right),), left, name="state_drift")


def lazy_srw_kernel() -> JumpKernel:
    """d=1 null control: uniform on {-1, 0, +1}, ignores the environment."""
    third = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    return JumpKernel(1, 1, (), third, name="lazy_srw")


def kernel_by_name(name: str, kappa: float = 0.1) -> JumpKernel:
    if name == "state_drift":
        return state_drift_kernel(kappa)
    if name == "lazy_srw":
        return lazy_srw_kernel()
    raise UsageError(f"unknown kernel {name!r}; choose state_drift or lazy_srw")


@dataclass(frozen=True)
class Trajectory:
    start: Site
    displacements: Tuple[Tuple[int, ...], ...]

    @property
    def steps(self) -> int:
        return len(self.displacements)

    def sites(self) -> Tuple[Site, ...]:
        out = [self.start]
        for dy in self.displacements:
            prev = out[-1]
            out.append(Site(tuple(a + b for a, b in zip(prev.x, dy)), prev.t + 1))
        return tuple(out)

    def final(self) -> Site:
        return self.sites()[-1]

    def as_allowed_path(self, lipschitz: int) -> AllowedPath:
        return AllowedPath(self.start.t, tuple(s.x for s in self.sites()), lipschitz)


def simulate(start: Site, steps: int, env, kernel: JumpKernel, walk_seed: int) -> Trajectory:
    """Iterate the site-noise recursion for `steps` steps.

    env must answer omega() at every visited site; censored environment
    queries propagate with the walk position attached.
    """
    if steps < 0:
        raise UsageError("steps must be nonnegative")
    if kernel.d != env.d:
        raise UsageError(f"kernel dim {kernel.d} != environment dim {env.d}")
    here = start
    disp = []
    for _ in range(steps):
        state = env.omega(here)
        u = site_uniform(here, walk_seed)
        dy = jump(kernel, state, u)
        disp.append(dy)
        here = Site(tuple(a + b for a, b in zip(here.x, dy)), here.t + 1)
    traj = Trajectory(start, tuple(disp))
    assert validate_allowed_path(traj.as_allowed_path(kernel.jump_range))
    return traj
