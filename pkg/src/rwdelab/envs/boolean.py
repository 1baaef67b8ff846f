"""Boolean continuum percolation as a dynamic environment.

A Poisson cloud of open Euclidean balls in R^(d+1) with heavy-tailed
radii.  Occupancy at a lattice site is membership in some ball; the
regeneration indicator at z asks that no ball centered within s/2 of z
(sup norm) touches lattice points of both the future and past cones at z.

Balls are generated cell by cell: every unit cell of Z^(d+1) draws a
Poisson count, uniform centers and law radii from a stream keyed by
(seed, cell), so the same cell yields identical balls whatever window is
queried.  Radii above rho_max are thinned out; the thinned mass per unit
volume is the reported sampling bias.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .. import rng
from ..lattice import Box, Site, UsageError

CELL_COUNT = 0
CELL_BALL = 1
_SUB = 1_000_000  # sub-stream stride inside a cell


@dataclass(frozen=True)
class RadiusLaw:
    """Pareto(rho0, beta) with survival min(1, (rho/rho0)^-beta), or a
    deterministic radius for analytic cross-checks."""

    kind: str  # "pareto" | "deterministic"
    rho0: float
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pareto", "deterministic"):
            raise UsageError(f"unknown radius law {self.kind!r}")
        if self.rho0 <= 0:
            raise UsageError("radius scale must be positive")
        if self.kind == "pareto" and self.beta <= 0:
            raise UsageError("pareto tail exponent must be positive")

    def survival(self, r: float) -> float:
        if r <= 0:
            return 1.0
        if self.kind == "deterministic":
            return 1.0 if r < self.rho0 else 0.0
        return min(1.0, (r / self.rho0) ** -self.beta)

    def sample(self, u: float) -> float:
        """Inverse-transform draw from a uniform in [0, 1)."""
        if self.kind == "deterministic":
            return self.rho0
        return self.rho0 * (1.0 - u) ** (-1.0 / self.beta)

    @staticmethod
    def pareto(rho0: float, beta: float) -> "RadiusLaw":
        return RadiusLaw("pareto", rho0, beta)

    @staticmethod
    def deterministic(rho: float) -> "RadiusLaw":
        return RadiusLaw("deterministic", rho)


@dataclass(frozen=True)
class BallRecord:
    center: Tuple[float, ...]  # d+1 real coordinates, time last
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise UsageError("ball radius must be positive")


@dataclass(frozen=True)
class BooleanConfig:
    d: int
    cone_slope: int
    lam: float  # Poisson intensity per unit volume
    radius_law: RadiusLaw
    trunc_s: int = 32
    rho_max: float = 64.0
    rho_max_tolerance: float = 1e-5  # alert threshold for the thinned tail
    discrete_cones: bool = True  # False: real convex hull (d=1 sensitivity mode)
    origin: Tuple[int, ...] = (0, 0)  # cell re-keying shift

    def __post_init__(self):
        if self.d < 1 or self.cone_slope < 1:
            raise UsageError("need d >= 1 and a positive cone slope")
        if self.lam < 0:
            raise UsageError("intensity must be nonnegative")
        if self.trunc_s < 1:
            raise UsageError("trunc_s must be >= 1")
        if self.rho_max <= 0:
            raise UsageError("rho_max must be positive")
        if self.radius_law.kind == "pareto" and self.radius_law.beta <= self.d + 1:
            raise UsageError(
                f"radius tail exponent {self.radius_law.beta} must exceed d+1 = {self.d + 1}"
            )
        if len(self.origin) != self.d + 1:
            raise UsageError("origin must have d+1 coordinates")

    @property
    def tail_exponent(self) -> float:
        """Polynomial decoupling rate of the regeneration field: beta - d - 1."""
        if self.radius_law.kind == "deterministic":
            return math.inf
        return self.radius_law.beta - self.d - 1

    def thinned_tail_mass(self) -> float:
        """Radius-law mass above rho_max, the per-ball sampling bias."""
        return self.radius_law.survival(self.rho_max)

    def truncation_bias_note(self) -> dict:
        """Reported per-query error budget of the window truncation and
        the radius cap (constants unknown, exponents exact)."""
        return {
            "window_error_order": f"s^-({self.tail_exponent})",
            "window_s": self.trunc_s,
            "rho_max": self.rho_max,
            "thinned_tail_mass": self.thinned_tail_mass(),
            "thinned_rate_per_volume": self.lam * self.thinned_tail_mass(),
        }


class BooleanEnv:
    """One realization (config, seed) of the Boolean environment."""

    def __init__(self, config: BooleanConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        self._cell_cache: dict = {}

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def cone_slope(self) -> int:
        return self.config.cone_slope

    # -- ball generation ---------------------------------------------------

    def cell_balls(self, cell: Tuple[int, ...]) -> List[BallRecord]:
        """Balls whose centers lie in [cell, cell+1); deterministic per
        (seed, cell) and cached read-through.

        Draw layout inside the cell stream: count draws at indices
        CELL_COUNT*stride + i, ball j's payload at CELL_BALL*stride +
        (d+2)*j + c with c = 0..d the center offsets (time last) and
        c = d+1 the radius uniform.
        """
        hit = self._cell_cache.get(cell)
        if hit is not None:
            return hit
        cfg = self.config
        rel = tuple(c - o for c, o in zip(cell, cfg.origin))
        lam = cfg.lam
        n = 0
        if lam > 0.0:
            limit = math.exp(-lam)
            prod = 1.0
            while True:
                prod *= rng.u01(self.seed, rng.TAG_BOOL_CELL, *rel, CELL_COUNT * _SUB + n)
                if prod < limit:
                    break
                n += 1
        stride = cfg.d + 2
        balls = []
        for j in range(n):
            us = [
                rng.u01(self.seed, rng.TAG_BOOL_CELL, *rel, CELL_BALL * _SUB + stride * j + c)
                for c in range(stride)
            ]
            center = tuple(c + u for c, u in zip(cell, us[:-1]))
            radius = cfg.radius_law.sample(us[-1])
            if radius <= cfg.rho_max:
                balls.append(BallRecord(center, radius))
        self._cell_cache[cell] = balls
        return balls

    def balls_near(self, z: Site, reach: float) -> List[BallRecord]:
        """Balls with centers within sup-norm distance < reach of z."""
        m = int(math.ceil(reach)) + 1
        out = []
        zc = z.x + (z.t,)
        for cell in itertools.product(*[range(c - m, c + m + 1) for c in zc]):
            for ball in self.cell_balls(cell):
                if max(abs(a - b) for a, b in zip(ball.center, zc)) < reach:
                    out.append(ball)
        return out

    # -- fields --------------------------------------------------------------

    def omega(self, z: Site) -> int:
        cfg = self.config
        zc = z.x + (z.t,)
        m = int(math.ceil(cfg.rho_max))
        for cell in itertools.product(*[range(c - m, c + m + 1) for c in zc]):
            for ball in self.cell_balls(cell):
                d2 = sum((a - b) ** 2 for a, b in zip(ball.center, zc))
                if d2 < ball.radius**2:
                    return 1
        return 0

    def eta_s(self, z: Site) -> int:
        cfg = self.config
        for ball in self.balls_near(z, 0.5 * cfg.trunc_s):
            if self.ball_crosses_both_cones(ball, z):
                return 0
        return 1

    def ball_crosses_both_cones(self, ball: BallRecord, z: Site) -> bool:
        if self.config.discrete_cones:
            return ball_crosses_cone_lattice(ball, z, self.cone_slope, "past") and \
                ball_crosses_cone_lattice(ball, z, self.cone_slope, "future")
        return ball_meets_cone_hull(ball, z, self.cone_slope, "past") and \
            ball_meets_cone_hull(ball, z, self.cone_slope, "future")

    def kernel_args(self):
        cfg = self.config
        if cfg.d != 1:
            raise UsageError("compiled Boolean drivers support d = 1 only")
        if cfg.origin != (0, 0):
            raise UsageError("compiled Boolean drivers assume the default origin")
        if not cfg.discrete_cones:
            raise UsageError("compiled Boolean drivers use discrete cones")
        kind = 1 if cfg.radius_law.kind == "deterministic" else 0
        beta = cfg.radius_law.beta if kind == 0 else 1.0
        return (cfg.lam, cfg.radius_law.rho0, beta, kind, cfg.rho_max)


def ball_crosses_cone_lattice(ball: BallRecord, z: Site, R: int, direction: str) -> bool:
    """Does the open ball contain a lattice point of the cone rooted at z?

    Per integer time slice the cone section is a sup-norm box; the closest
    lattice point of that box to the ball's slice center is the
    coordinatewise clamped rounding, which attains the exact minimum of
    the (separable) Euclidean distance.
    """
    *cx, ct = ball.center
    rho = ball.radius
    t_lo = math.ceil(ct - rho)
    t_hi = math.floor(ct + rho)
    for t in range(t_lo, t_hi + 1):
        if direction == "future":
            if t < z.t:
                continue
            half = R * (t - z.t)
        else:
            if t > z.t:
                continue
            half = R * (z.t - t)
        r2 = rho**2 - (t - ct) ** 2
        if r2 <= 0:
            continue
        d2 = 0.0
        for c, center_x in zip(z.x, cx):
            p = math.floor(center_x + 0.5)
            p = min(max(p, c - half), c + half)
            d2 += (p - center_x) ** 2
        if d2 < r2:
            return True
    return False


def ball_meets_cone_hull(ball: BallRecord, z: Site, R: int, direction: str) -> bool:
    """Sensitivity-check variant: intersect the real convex hull of the
    cone instead of its lattice points (d = 1 only)."""
    if len(z.x) != 1:
        raise UsageError("hull-mode cones are implemented for d = 1 only")
    cx, ct = ball.center
    a = cx - z.x[0]
    b = ct - z.t
    if direction == "past":
        b = -b
    # wedge {(a,b): b >= 0, |a| <= R b}; distance from (a,b) to it
    if b >= 0 and abs(a) <= R * b:
        dist = 0.0
    else:
        a0 = abs(a)
        # nearest point on the ray (u, u/R * ... ) parametrized as (R s, s), s >= 0
        s = max(0.0, (R * a0 + b) / (R * R + 1.0))
        dist = math.hypot(a0 - R * s, b - s)
    return dist < ball.radius


def sample_balls(window: Optional[Box], config: BooleanConfig, seed: int) -> List[BallRecord]:
    """Every ball whose center lies in the real envelope of the window.

    The envelope of an integer box is the union of the unit cells of its
    lattice points; passing None (an empty window) yields no balls.
    """
    if window is None:
        return []
    if window.d != config.d:
        raise UsageError(f"window dim {window.d} != config dim {config.d}")
    env = BooleanEnv(config, seed)
    out: List[BallRecord] = []
    for cell in itertools.product(*[range(a, b + 1) for a, b in zip(window.lo, window.hi)]):
        out.extend(env.cell_balls(cell))
    return out


def omega_at(z: Site, config: BooleanConfig, seed: int) -> int:
    return BooleanEnv(config, seed).omega(z)


def eta_s_at(z: Site, config: BooleanConfig, seed: int) -> int:
    return BooleanEnv(config, seed).eta_s(z)
