"""Independent stationary renewal chains as a dynamic environment.

Each spatial column x carries an independent renewal chain: the state
counts down to zero and, from zero, jumps to a fresh interarrival draw.
The graphical construction splits every jump into a mixture of a
stationary-law draw (taken with the restart probability) and a residual
draw; restart jumps are exactly the events that decouple a column's
future from its past, which is what the regeneration field looks for.

Stationary values are produced by coupling from the past: run the chain
from zero at ever deeper starting times until the queried value is stable
across depth doublings.  The certificate is heuristic; the residual bias
is reported through ``omega_with_diag`` rather than silently ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .. import rng
from ..lattice import Site, UsageError
from .base import CensoredFieldError, CensoredTimeError, CensoredValueError

PMF_TOL = 1e-12
TAIL_CUTOFF = 1e-12


@dataclass(frozen=True)
class InterarrivalLaw:
    """A finitely supported interarrival distribution on {0, 1, ...}.

    Parametric laws are truncated where their tail mass drops below
    1e-12 and renormalized; the discarded mass is kept as
    ``truncation_defect`` for reporting.
    """

    pmf: np.ndarray
    name: str = "pmf"
    params: Tuple[float, ...] = ()
    moment_order: float = 6.0  # declared finite moment 1 + delta
    truncation_defect: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise UsageError("interarrival pmf must be a nonempty 1-d array")
        if np.any(p < 0):
            raise UsageError("interarrival pmf has negative entries")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise UsageError(f"interarrival pmf sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "pmf", p)

    @property
    def mean(self) -> float:
        return float(np.arange(self.pmf.size) @ self.pmf)

    @property
    def support_max(self) -> int:
        return int(self.pmf.size - 1)

    def tail(self) -> np.ndarray:
        """P(xi >= k) for k = 0..support_max."""
        return self.pmf[::-1].cumsum()[::-1]

    @staticmethod
    def geometric(q: float, moment_order: float = 6.0) -> "InterarrivalLaw":
        if not 0.0 < q < 1.0:
            raise UsageError("geometric parameter must be in (0,1)")
        kmax = max(1, int(math.ceil(math.log(TAIL_CUTOFF) / math.log(q))))
        k = np.arange(kmax + 1)
        pmf = (1.0 - q) * q**k
        defect = 1.0 - pmf.sum()
        return InterarrivalLaw(pmf / pmf.sum(), "geometric", (q,), moment_order, defect)

    @staticmethod
    def delta(k: int) -> "InterarrivalLaw":
        pmf = np.zeros(k + 1)
        pmf[k] = 1.0
        return InterarrivalLaw(pmf, "delta", (float(k),), math.inf)

    @staticmethod
    def uniform_range(a: int, b: int) -> "InterarrivalLaw":
        if not 0 <= a <= b:
            raise UsageError("uniform range needs 0 <= a <= b")
        pmf = np.zeros(b + 1)
        pmf[a : b + 1] = 1.0 / (b - a + 1)
        return InterarrivalLaw(pmf, "uniform", (float(a), float(b)), math.inf)

    @staticmethod
    def from_pmf(values, moment_order: float = 6.0) -> "InterarrivalLaw":
        p = np.asarray(list(values), dtype=np.float64)
        return InterarrivalLaw(p / p.sum(), "pmf", (), moment_order)


def stationary_law(mu: InterarrivalLaw) -> np.ndarray:
    """The stationary marginal of the chain: tail(k) / (mean + 1).

    This is also the law of the value seen at a deterministic time, and
    the law of restart jumps in the graphical construction.
    """
    if not math.isfinite(mu.mean):
        raise UsageError("stationary law needs a finite-mean interarrival law")
    hat = mu.tail() / (mu.mean + 1.0)
    return hat / hat.sum()


def restart_ratio(mu: InterarrivalLaw) -> float:
    """Infimum of pmf / stationary-law over the stationary support.

    Positive only when the hazard rate is bounded away from zero; zero
    (e.g. when pmf(0) = 0) means the restart-mixture construction is
    unavailable for this law.
    """
    hat = stationary_law(mu)
    mask = hat > 0
    return float(np.min(mu.pmf[mask] / hat[mask]))


def residual_law(mu: InterarrivalLaw) -> Tuple[np.ndarray, float]:
    """Non-restart jump law (pmf - gamma * stationary) / (1 - gamma).

    Returns (pmf, defect) where defect is the mass clipped away by
    floating-point cancellation.  When gamma is numerically 1 the law is
    irrelevant (restarts always fire) and a point mass at 0 is returned.
    """
    gamma = restart_ratio(mu)
    if gamma >= 1.0 - 1e-9:
        out = np.zeros(mu.pmf.size)
        out[0] = 1.0
        return out, 0.0
    raw = mu.pmf - gamma * stationary_law(mu)
    clipped = np.clip(raw, 0.0, None)
    defect = float(clipped.sum() - raw.sum())
    return clipped / clipped.sum(), defect


@dataclass(frozen=True)
class RenewalConfig:
    """Parameters of the renewal environment family.

    trunc_s is the window radius of the truncated regeneration field; k0,
    k_max and confirmations steer the coupling-from-the-past certificate;
    horizon bounds stopping-time scans.
    """

    mu: InterarrivalLaw
    d: int = 1
    cone_slope: int = 1
    trunc_s: int = 32
    k0: int = 32
    k_max: int = 1 << 16
    confirmations: int = 2
    horizon: int = 100_000
    origin: Tuple[int, ...] = (0, 0)  # noise re-keying shift (spatial..., time)

    def __post_init__(self):
        if self.d < 1 or self.cone_slope < 1:
            raise UsageError("need d >= 1 and a positive cone slope")
        if self.trunc_s < 1 or self.k0 < 1 or self.confirmations < 1:
            raise UsageError("trunc_s, k0 and confirmations must be >= 1")
        if len(self.origin) != self.d + 1:
            raise UsageError("origin must have d+1 coordinates")
        if restart_ratio(self.mu) <= 0.0:
            raise UsageError(
                "interarrival law has zero restart ratio; the graphical "
                "construction needs inf pmf/stationary > 0"
            )


class RenewalEnv:
    """One realization (config, seed) of the renewal environment.

    All queries are pure functions of (config, seed, coordinates); the
    compiled drivers in _kernels.py reproduce these exact values for d=1.
    """

    def __init__(self, config: RenewalConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        self.gamma = restart_ratio(config.mu)
        self.hat_pmf = stationary_law(config.mu)
        self.y_pmf, self.residual_defect = residual_law(config.mu)
        self.hat_cdf = rng.pmf_to_cdf(self.hat_pmf)
        self.y_cdf = rng.pmf_to_cdf(self.y_pmf)

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def cone_slope(self) -> int:
        return self.config.cone_slope

    # -- graphical construction noise ------------------------------------

    def _noise_u(self, x: Tuple[int, ...], t: int, idx: int) -> float:
        ox, ot = self.config.origin[:-1], self.config.origin[-1]
        rel = tuple(a - b for a, b in zip(x, ox))
        return rng.u01(self.seed, rng.TAG_REN_NOISE, *rel, t - ot, idx)

    def noise(self, x, t: int) -> Tuple[int, int, int]:
        """The driving triple (stationary jump, restart flag, residual jump)."""
        x = self._as_column(x)
        what = rng.sample_cdf(self.hat_cdf, self._noise_u(x, t, 0))
        restart = 1 if self._noise_u(x, t, 1) < self.gamma else 0
        resid = rng.sample_cdf(self.y_cdf, self._noise_u(x, t, 2))
        return what, restart, resid

    def composed_jump(self, x, t: int) -> int:
        """The chain jump at (x,t); mixture with the interarrival law."""
        what, restart, resid = self.noise(self._as_column(x), t)
        return what if restart else resid

    def _as_column(self, x) -> Tuple[int, ...]:
        if isinstance(x, (int, np.integer)):
            if self.d != 1:
                raise UsageError("scalar column index only valid for d = 1")
            return (int(x),)
        x = tuple(int(v) for v in x)
        if len(x) != self.d:
            raise UsageError(f"column index has dim {len(x)}, expected {self.d}")
        return x

    # -- stationary chain values ------------------------------------------

    def _chain_from(self, x: Tuple[int, ...], a: int, b: int) -> int:
        val = 0
        for t in range(a + 1, b + 1):
            if val >= 1:
                val -= 1
            else:
                val = self.composed_jump(x, t)
        return val

    def omega_with_diag(self, z: Site) -> Tuple[int, int, float]:
        """(value, depth, bias_bound): the coupling tail bound is
        depth**-(1+delta) up to an unknowable constant."""
        cfg = self.config
        x = self._as_column(z.x)
        k = cfg.k0
        prev = self._chain_from(x, z.t - k, z.t)
        conf = 0
        while conf < cfg.confirmations:
            k *= 2
            if k > cfg.k_max:
                raise CensoredValueError(
                    f"chain value at {z} not stable within depth {cfg.k_max}",
                    site=z, last_value=prev, depth=k // 2,
                )
            cur = self._chain_from(x, z.t - k, z.t)
            if cur == prev:
                conf += 1
            else:
                conf = 0
                prev = cur
        delta = min(self.config.mu.moment_order - 1.0, 64.0)
        return prev, k, float(k) ** -(1.0 + delta)

    def omega(self, z: Site) -> int:
        return self.omega_with_diag(z)[0]

    # -- regeneration structure --------------------------------------------

    def _good(self, x: Tuple[int, ...], t: int) -> bool:
        """Chain at zero and the next jump is a restart draw."""
        return self.omega(Site(x, t)) == 0 and self._noise_u(x, t + 1, 1) < self.gamma

    def _first_good(self, x: Tuple[int, ...], lo: int, hi: int) -> int | None:
        """First good time in [lo, hi), or None."""
        if hi <= lo:
            return None
        val = self.omega(Site(x, lo))
        for t in range(lo, hi):
            if val == 0 and self._noise_u(x, t + 1, 1) < self.gamma:
                return t
            val = val - 1 if val >= 1 else self.composed_jump(x, t + 1)
        return None

    def cone_entry_offset(self, dx: Tuple[int, ...]) -> int:
        """Time offset of the past-cone boundary over a column at spatial
        offset dx: -ceil(|dx| / slope) + 1, and 0 for the anchor column."""
        k = max(abs(v) for v in dx) if any(dx) else 0
        if k == 0:
            return 0
        return -((k + self.cone_slope - 1) // self.cone_slope) + 1

    def first_regen_time(self, x, anchor: Site) -> int:
        """Least good time scanning forward from the past-cone boundary.

        For the anchor column the scan starts at the anchor time itself
        (the boundary formula would make an on-anchor regeneration
        impossible, contradicting its positive probability).
        """
        x = self._as_column(x)
        dx = tuple(a - b for a, b in zip(x, anchor.x))
        lo = anchor.t + self.cone_entry_offset(dx)
        g = self._first_good(x, lo, lo + self.config.horizon)
        if g is None:
            raise CensoredTimeError(
                f"no regeneration for column {x} within horizon {self.config.horizon}",
                column=x, anchor=anchor, scanned_from=lo,
            )
        return g

    def eta_s(self, z: Site) -> int:
        """Truncated regeneration indicator at anchor z.

        1 iff the anchor column is good exactly at z.t and every other
        column within the window regenerates strictly before the forward
        cone reaches it.  The per-column scan is bounded by the cone
        constraint, so no horizon is involved.
        """
        cfg = self.config
        x0 = self._as_column(z.x)
        R = self.cone_slope
        try:
            if not self._good(x0, z.t):
                return 0
            for k in range(1, cfg.trunc_s + 1):
                for dx in self._sphere(k):
                    x = tuple(a + b for a, b in zip(x0, dx))
                    lo = z.t - (k + R - 1) // R + 1
                    hi = z.t + (k - 1) // R + 1  # good time must be < z.t + k/R
                    if self._first_good(x, lo, hi) is None:
                        return 0
        except CensoredValueError as err:
            raise CensoredFieldError(
                f"regeneration indicator at {z} depends on a censored chain value",
                anchor=z, cause=err,
            ) from err
        return 1

    def _sphere(self, k: int):
        """Spatial offsets at sup-norm distance exactly k."""
        if self.d == 1:
            yield (-k,)
            yield (k,)
            return
        import itertools

        for v in itertools.product(range(-k, k + 1), repeat=self.d):
            if max(abs(c) for c in v) == k:
                yield v

    # -- kernel packing (d=1 fast paths) ------------------------------------

    def kernel_args(self):
        if self.d != 1:
            raise UsageError("compiled renewal drivers support d = 1 only")
        cfg = self.config
        if cfg.origin != (0, 0):
            raise UsageError("compiled renewal drivers assume the default origin")
        return (self.hat_cdf, self.y_cdf, self.gamma,
                cfg.k0, cfg.k_max, cfg.confirmations)


def config_kernel_args(config: RenewalConfig):
    return RenewalEnv(config, 0).kernel_args()
