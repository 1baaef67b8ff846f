"""Space-time lattice geometry: points, cones, boxes, allowed paths.

Points live in Z^d x Z with the time coordinate last.  All distances are
L-infinity.  Coordinates are signed 64-bit; anything approaching the
representable range is a checked error, not wraparound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

COORD_LIMIT = 2**62  # overflow guard, far above any desk-scale experiment


class UsageError(ValueError):
    """Caller violated a documented precondition."""


def _check_coord(v: int) -> int:
    v = int(v)
    if abs(v) >= COORD_LIMIT:
        raise UsageError(f"coordinate {v} outside the checked 64-bit range")
    return v


@dataclass(frozen=True)
class Site:
    """A space-time lattice site z = (x, t); x spatial, t the time axis."""

    x: Tuple[int, ...]
    t: int

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(_check_coord(v) for v in self.x))
        object.__setattr__(self, "t", _check_coord(self.t))

    @property
    def d(self) -> int:
        return len(self.x)

    def shifted(self, other: "Site") -> "Site":
        _same_dim(self, other)
        return Site(tuple(a + b for a, b in zip(self.x, other.x)), self.t + other.t)


def site(x, t: int) -> Site:
    """Build a Site from a scalar or iterable spatial part."""
    if isinstance(x, Iterable) and not isinstance(x, (str, bytes)):
        return Site(tuple(int(v) for v in x), int(t))
    return Site((int(x),), int(t))


def _same_dim(a: Site, b: Site) -> None:
    if a.d != b.d:
        raise UsageError(f"dimension mismatch: {a.d} vs {b.d}")


def linf(v: Sequence[int]) -> int:
    return max(abs(int(c)) for c in v) if len(v) else 0


def cone_contains(apex: Site, w: Site, cone_slope: int, direction: str) -> bool:
    """Membership of w in the future or past cone rooted at apex.

    The future cone collects sites reachable from the apex by paths whose
    spatial displacement per time step is at most ``cone_slope`` in
    L-infinity; the past cone is its time reflection.
    """
    _same_dim(apex, w)
    if cone_slope < 1:
        raise UsageError("cone slope must be a positive integer")
    dt = w.t - apex.t
    dx = linf(tuple(a - b for a, b in zip(w.x, apex.x)))
    if direction == "future":
        return dt >= 0 and dx <= cone_slope * dt
    if direction == "past":
        return dt <= 0 and dx <= cone_slope * (-dt)
    raise UsageError(f"direction must be 'future' or 'past', got {direction!r}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned integer box, the product of closed intervals [lo_i, hi_i].

    Axis d+1 (the last one) is time.  Spatial diameter, height and vertical
    separation follow the usual space-time box calculus.
    """

    lo: Tuple[int, ...]
    hi: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(_check_coord(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(_check_coord(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise UsageError("box lo/hi length mismatch")
        if len(self.lo) < 2:
            raise UsageError("box needs at least one spatial axis plus time")
        for a, b in zip(self.lo, self.hi):
            if a > b:
                raise UsageError(f"box interval [{a}, {b}] is empty")

    @property
    def d(self) -> int:
        return len(self.lo) - 1

    @property
    def t_lo(self) -> int:
        return self.lo[-1]

    @property
    def t_hi(self) -> int:
        return self.hi[-1]

    def spatial_diameter(self) -> int:
        return max(b - a for a, b in zip(self.lo[:-1], self.hi[:-1]))

    def height(self) -> int:
        return self.t_hi - self.t_lo

    def sites(self):
        """Iterate all lattice sites of the box (row-major, time slowest)."""
        spatial = [range(a, b + 1) for a, b in zip(self.lo[:-1], self.hi[:-1])]
        for t in range(self.t_lo, self.t_hi + 1):
            for xs in itertools.product(*spatial):
                yield Site(tuple(xs), t)

    def n_sites(self) -> int:
        n = self.t_hi - self.t_lo + 1
        for a, b in zip(self.lo[:-1], self.hi[:-1]):
            n *= b - a + 1
        return n

    def contains_site(self, z: Site) -> bool:
        if z.d != self.d:
            raise UsageError(f"dimension mismatch: {z.d} vs {self.d}")
        coords = z.x + (z.t,)
        return all(a <= c <= b for a, c, b in zip(self.lo, coords, self.hi))


def box1d(x_lo: int, x_hi: int, t_lo: int, t_hi: int) -> Box:
    return Box((x_lo, t_lo), (x_hi, t_hi))


def separation(a: Box, b: Box) -> int:
    """Vertical (time-axis) separation of two boxes; 0 when they overlap."""
    if a.d != b.d:
        raise UsageError(f"dimension mismatch: {a.d} vs {b.d}")
    if b.t_hi < a.t_lo:
        return a.t_lo - b.t_hi
    if a.t_hi < b.t_lo:
        return b.t_lo - a.t_hi
    return 0


@dataclass(frozen=True)
class AllowedPath:
    """A time-indexed path with per-step L-infinity Lipschitz constant.

    Site k of the path sits at time start_time + k.
    """

    start_time: int
    sites: Tuple[Tuple[int, ...], ...]  # spatial coordinates only
    lipschitz: int

    def __post_init__(self):
        if len(self.sites) == 0:
            raise UsageError("empty path")
        if self.lipschitz < 1:
            raise UsageError("lipschitz constant must be a positive integer")
        object.__setattr__(
            self,
            "sites",
            tuple(tuple(_check_coord(v) for v in s) for s in self.sites),
        )

    @property
    def length(self) -> int:
        return len(self.sites) - 1

    def site_at(self, k: int) -> Site:
        return Site(self.sites[k], self.start_time + k)


def validate_allowed_path(p: AllowedPath) -> bool:
    d = len(p.sites[0])
    if any(len(s) != d for s in p.sites):
        return False
    for a, b in zip(p.sites, p.sites[1:]):
        if linf(tuple(u - v for u, v in zip(a, b))) > p.lipschitz:
            return False
    return True
