"""Statistical machinery: intervals, slope fits, KS, and the two
paper-specific verification batteries (conditional independence of past
and future statistics at regeneration points, and the polynomial
covariance bound for separated box functionals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps
from scipy.linalg import solve_triangular

from . import rng
from ._kernels import bool_pair_counts, ren_pair_counts
from .envs.boolean import BooleanConfig, BooleanEnv
from .envs.renewal import RenewalConfig, RenewalEnv
from .lattice import Box, Site, UsageError, cone_contains, separation

FIELD_IDS = {"regen": 0, "vacant": 1, "occupied": 2, "restart": 3}
REDUCER_IDS = {"all_zero": 0, "any_one": 1, "parity": 2, "count_ge": 3}


def wilson_ci(successes: int, n: int, z: float = 1.96) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise UsageError("n must be positive")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def loglog_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares slope of log y on log x with its standard error."""
    if len(points) < 3:
        raise UsageError("need at least 3 points for a log-log fit")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise UsageError("log-log fit needs strictly positive coordinates")
    lx, ly = np.log(xs), np.log(ys)
    vx = lx - lx.mean()
    slope = float(vx @ (ly - ly.mean()) / (vx @ vx))
    resid = ly - ly.mean() - slope * vx
    dof = len(points) - 2
    se = float(np.sqrt((resid @ resid) / dof / (vx @ vx))) if dof > 0 else 0.0
    return slope, se


@dataclass
class TestReport:
    statistic: float
    p_value: float
    n: int
    method: str
    null_desc: str
    inconclusive: bool = False
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise AssertionError(f"p-value {self.p_value} outside [0,1]")


def ks_gaussian(samples: np.ndarray, mean, cov) -> TestReport:
    """Kolmogorov-Smirnov against a Gaussian after whitening.

    Coordinates are whitened with the Cholesky factor and tested
    one-dimensionally; the combined p-value is Bonferroni over
    coordinates.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, d = x.shape
    if n == 0:
        raise UsageError("no samples")
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (d,))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise UsageError("singular covariance") from err
    z = solve_triangular(chol, (x - mean).T, lower=True).T
    stats_ = []
    ps = []
    for j in range(d):
        ks = sps.kstest(z[:, j], "norm")
        stats_.append(ks.statistic)
        ps.append(ks.pvalue)
    p = min(1.0, d * min(ps))
    return TestReport(float(max(stats_)), float(p), n, "ks-whitened-bonferroni",
                      "samples drawn from the reference Gaussian",
                      extras={"per_coordinate_p": ps})


# ----------------------------------------------------- 2x2 independence test


def _chi2_stat(table: np.ndarray) -> float:
    n = table.sum()
    r = table.sum(axis=1)
    c = table.sum(axis=0)
    stat = 0.0
    for i in range(2):
        for j in range(2):
            e = r[i] * c[j] / n
            if e > 0:
                stat += (table[i, j] - e) ** 2 / e
    return float(stat)


def chi2_2x2(table: np.ndarray) -> TestReport:
    """Pearson chi-squared for a 2x2 table.

    When any expected count is below 5 the p-value is calibrated exactly
    under the permutation null (fixed margins, hypergeometric cell law)
    instead of the asymptotic chi-squared.  A degenerate margin makes the
    test inconclusive rather than a pass.
    """
    t = np.asarray(table, dtype=np.float64)
    if t.shape != (2, 2) or np.any(t < 0):
        raise UsageError("need a nonnegative 2x2 table")
    n = t.sum()
    r = t.sum(axis=1)
    c = t.sum(axis=0)
    if n == 0 or np.any(r == 0) or np.any(c == 0):
        return TestReport(0.0, 1.0, int(n), "chi2-degenerate",
                          "independence of the two binary statistics",
                          inconclusive=True)
    stat = _chi2_stat(t)
    expected = np.outer(r, c) / n
    if expected.min() >= 5.0:
        p = float(sps.chi2.sf(stat, df=1))
        method = "chi2-asymptotic"
    else:
        # exact permutation null: condition on margins, enumerate the
        # hypergeometric law of the (0,0) cell
        n1, m1 = int(r[0]), int(c[0])
        lo = max(0, n1 + m1 - int(n))
        hi = min(n1, m1)
        ks = np.arange(lo, hi + 1)
        probs = sps.hypergeom.pmf(ks, int(n), n1, m1)
        p = 0.0
        for k, pk in zip(ks, probs):
            tt = np.array([[k, n1 - k], [m1 - k, n - n1 - m1 + k]], dtype=np.float64)
            if _chi2_stat(tt) >= stat - 1e-9:
                p += pk
        p = float(min(1.0, p))
        method = "chi2-exact-conditional"
    return TestReport(stat, p, int(n), method,
                      "independence of the two binary statistics")


# ------------------------------------------------------------ box functionals


@dataclass(frozen=True)
class BoxFunctional:
    """A binary statistic of a binary field restricted to a box.

    field: regen | vacant | occupied | restart (restart reads the renewal
    driving noise and is only legitimate for past-cone statistics).
    reducer: all_zero | any_one | parity | count_ge (with threshold).
    """

    box: Box
    field: str = "regen"
    reducer: str = "all_zero"
    threshold: int = 1

    def __post_init__(self):
        if self.field not in FIELD_IDS:
            raise UsageError(f"unknown field {self.field!r}")
        if self.reducer not in REDUCER_IDS:
            raise UsageError(f"unknown reducer {self.reducer!r}")

    def apply_bits(self, bits: Sequence[int]) -> int:
        bits = list(bits)
        if self.reducer == "all_zero":
            return 1 if not any(bits) else 0
        if self.reducer == "any_one":
            return 1 if any(bits) else 0
        if self.reducer == "parity":
            return sum(bits) & 1
        return 1 if sum(bits) >= self.threshold else 0

    def evaluate(self, env) -> int:
        """Reference evaluation against an environment view (any d)."""
        bits = []
        for z in self.box.sites():
            if self.field == "regen":
                bits.append(env.eta_s(z))
            elif self.field == "vacant":
                bits.append(1 if env.omega(z) == 0 else 0)
            elif self.field == "occupied":
                bits.append(1 if env.omega(z) >= 1 else 0)
            else:
                bits.append(env.noise(z.x, z.t)[1])
        return self.apply_bits(bits)

    def packed(self) -> Tuple[int, int, int, np.ndarray]:
        if self.box.d != 1:
            raise UsageError("compiled statistic drivers support d = 1 only")
        b = np.array([self.box.lo[0], self.box.hi[0], self.box.lo[1], self.box.hi[1]],
                     dtype=np.int64)
        return FIELD_IDS[self.field], REDUCER_IDS[self.reducer], self.threshold, b


def _pair_counts(env_config, f1: BoxFunctional, f2: BoxFunctional, n: int,
                 seed: int, conditioned: bool, max_rejections: int = 100_000) -> np.ndarray:
    """Joint 2x2 counts of the two statistics over n fresh realizations."""
    useed = np.uint64(seed & rng.U64)
    if env_config.d == 1:
        a = f1.packed()
        b = f2.packed()
        if isinstance(env_config, RenewalConfig):
            counts, status = ren_pair_counts(
                useed, n, 1 if conditioned else 0, max_rejections,
                a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3],
                env_config.trunc_s, env_config.cone_slope,
                *RenewalEnv(env_config, 0).kernel_args())
        else:
            counts, status = bool_pair_counts(
                useed, n, 1 if conditioned else 0, max_rejections,
                a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3],
                env_config.trunc_s, env_config.cone_slope,
                *BooleanEnv(env_config, 0).kernel_args())
        if status == 1:
            raise RuntimeError("acceptance cap hit while sampling conditioned pairs")
        if status == -1:
            raise RuntimeError("censored environment query while sampling pairs")
        return np.asarray(counts)
    from .regen import make_env

    counts = np.zeros((2, 2), dtype=np.int64)
    origin = Site((0,) * env_config.d, 0)
    for i in range(n):
        for rej in range(max_rejections):
            env = make_env(env_config, rng.derive(seed, i, rej))
            if not conditioned or env.eta_s(origin) == 1:
                break
        else:
            raise RuntimeError("acceptance cap hit")
        counts[f1.evaluate(env), f2.evaluate(env)] += 1
    return counts


# ------------------------------------------------------------ decoupling test


def decoupling_shape(env_config, r: int, h: int, s: int) -> float:
    """The box-size factor of the analytic covariance bound.

    Boolean family: sites ~ (r+1)^d (h+1) with window decay s^-alpha;
    renewal family: the influence zone widens by the window, giving
    (r+s+1)^d (h+1) s^-alpha.  alpha is the family's tail exponent.
    """
    alpha = env_tail_exponent(env_config)
    d = env_config.d
    if isinstance(env_config, RenewalConfig):
        return float((r + s + 1) ** d * (h + 1) * s ** (-alpha))
    return float((r + 1) ** d * (h + 1) * s ** (-alpha))


def env_tail_exponent(env_config) -> float:
    """Polynomial decay rate of the family's covariance bound.

    Boolean: radius tail exponent minus d+1.  Renewal: the declared finite
    moment order is 1+beta, and the bound decays at beta - d - 1.
    """
    if isinstance(env_config, BooleanConfig):
        return env_config.tail_exponent
    return (env_config.mu.moment_order - 1.0) - env_config.d - 1.0


@dataclass
class DecouplingResult:
    covariance: float
    se: float
    ci: Tuple[float, float]
    bound: float
    n: int
    counts: np.ndarray
    passed: bool
    geometry: Tuple[int, int, int]  # (r, h, s)


def _decouple_counts(env_config, f1: BoxFunctional, f2: BoxFunctional, n: int,
                     seed: int) -> np.ndarray:
    """Joint counts for two regeneration-field statistics on shared
    realizations, using the per-realization box evaluators."""
    useed = np.uint64(seed & rng.U64)
    if env_config.d == 1:
        from ._kernels import bool_decouple_counts, ren_decouple_counts

        a = f1.packed()
        b = f2.packed()
        if isinstance(env_config, RenewalConfig):
            counts, status = ren_decouple_counts(
                useed, n, a[1], a[2], a[3], b[1], b[2], b[3],
                env_config.trunc_s, env_config.cone_slope,
                *RenewalEnv(env_config, 0).kernel_args())
        else:
            counts, status = bool_decouple_counts(
                useed, n, a[1], a[2], a[3], b[1], b[2], b[3],
                env_config.trunc_s, env_config.cone_slope,
                *BooleanEnv(env_config, 0).kernel_args())
        if status == -1:
            raise RuntimeError("censored environment query while sampling pairs")
        return np.asarray(counts)
    return _pair_counts(env_config, f1, f2, n, seed, conditioned=False)


def decoupling_test(env_config, f1: BoxFunctional, f2: BoxFunctional, n: int,
                    seed: int, c_constant: float, n_boot: int = 1000) -> DecouplingResult:
    """Estimate cov(f1, f2) over realizations and compare against the
    analytic polynomial bound with the supplied constant.

    Functionals must read the regeneration field (that is what the
    decoupling property constrains) and their boxes must be vertically
    separated.
    """
    if f1.field != "regen" or f2.field != "regen":
        raise UsageError("decoupling functionals read the regeneration field")
    sep = separation(f1.box, f2.box)
    if sep < 1:
        raise UsageError("boxes must have vertical separation >= 1")
    counts = _decouple_counts(env_config, f1, f2, n, seed)
    cov, se, ci = _cov_from_counts(counts, n_boot, rng.derive(seed, rng.TAG_BOOT))
    r = max(f1.box.spatial_diameter(), f2.box.spatial_diameter())
    h = max(f1.box.height(), f2.box.height())
    bound = c_constant * decoupling_shape(env_config, r, h, sep)
    return DecouplingResult(cov, se, ci, bound, n, counts,
                            passed=bool(cov <= bound + 3.0 * se),
                            geometry=(r, h, sep))


def _cov_from_counts(counts: np.ndarray, n_boot: int, boot_seed: int):
    n = counts.sum()
    p = counts / n
    cov = float(p[1, 1] - p[1, :].sum() * p[:, 1].sum())
    gen = np.random.default_rng(boot_seed)
    flat = counts.ravel() / n
    sims = gen.multinomial(n, flat, size=n_boot) / n
    covs = sims[:, 3] - (sims[:, 2] + sims[:, 3]) * (sims[:, 1] + sims[:, 3])
    return cov, float(covs.std(ddof=1)), (float(np.quantile(covs, 0.025)),
                                          float(np.quantile(covs, 0.975)))


def fit_decoupling_constant(env_config, reference: Tuple[int, int, int], n: int,
                            seed: int) -> float:
    """Calibrate the bound constant at one reference geometry (r, h, s):
    the upper CI of the measured covariance over the shape factor."""
    r, h, s = reference
    f1 = BoxFunctional(Box((0, -s - h), (r, -s)), "regen", "all_zero")
    f2 = BoxFunctional(Box((0, 1), (r, 1 + h)), "regen", "all_zero")
    counts = _decouple_counts(env_config, f1, f2, n, seed)
    cov, se, _ = _cov_from_counts(counts, 400, rng.derive(seed, rng.TAG_BOOT, 1))
    shape = decoupling_shape(env_config, r, h, separation(f1.box, f2.box))
    return max(cov + 2.0 * se, 1e-4) / shape


def decoupling_battery(env_config, n_pairs: int, n_per_pair: int, seed: int,
                       reference: Tuple[int, int, int] = (4, 4, 4),
                       n_ref: Optional[int] = None) -> dict:
    """Randomized decoupling battery: the covariance of every randomized
    separated pair must stay below the bound whose constant was fitted
    once at the reference geometry."""
    c = fit_decoupling_constant(env_config, reference,
                                n_ref or 4 * n_per_pair, rng.derive(seed, 0))
    gen = np.random.default_rng(rng.derive(seed, 1))
    results = []
    for i in range(n_pairs):
        r1, r2 = int(gen.integers(0, 7)), int(gen.integers(0, 7))
        h1, h2 = int(gen.integers(0, 7)), int(gen.integers(0, 7))
        sep = int(gen.choice([4, 6, 8, 12, 16, 24, 32]))
        off1, off2 = int(gen.integers(-4, 5)), int(gen.integers(-4, 5))
        f1 = BoxFunctional(Box((off1, -h1 - sep), (off1 + r1, -sep)), "regen",
                           str(gen.choice(["all_zero", "any_one", "parity", "count_ge"])),
                           int(gen.integers(1, 4)))
        f2 = BoxFunctional(Box((off2, 1), (off2 + r2, 1 + h2)), "regen",
                           str(gen.choice(["all_zero", "any_one", "parity", "count_ge"])),
                           int(gen.integers(1, 4)))
        results.append(decoupling_test(env_config, f1, f2, n_per_pair,
                                       rng.derive(seed, 2, i), c))
    return {
        "c_constant": c,
        "n_pairs": n_pairs,
        "n_passed": sum(r.passed for r in results),
        "results": results,
    }


# ----------------------------------------------------------------- RMP test


def rmp_test(env_config, past_stat: BoxFunctional, future_stat: BoxFunctional,
             n: int, seed: int, conditioned: bool = True) -> TestReport:
    """Conditional independence of a past-cone and a future-cone statistic
    given a regeneration point at the origin.

    The future statistic may read occupancy only (the regeneration field
    and driving noise belong to the past sigma-algebra in this test); the
    past statistic may read everything.  Passing means independence is NOT
    rejected.
    """
    if future_stat.field not in ("vacant", "occupied"):
        raise UsageError("future statistic must read occupancy only")
    _require_in_cone(past_stat.box, env_config.cone_slope, "past")
    _require_in_cone(future_stat.box, env_config.cone_slope, "future")
    counts = _pair_counts(env_config, past_stat, future_stat, n, seed,
                          conditioned=conditioned)
    report = chi2_2x2(counts)
    report.extras["counts"] = counts.tolist()
    report.extras["conditioned"] = conditioned
    return report


def _require_in_cone(box: Box, slope: int, direction: str) -> None:
    for corner_t in (box.t_lo, box.t_hi):
        for corner_x in (box.lo[:-1], box.hi[:-1]):
            z = Site(tuple(corner_x), corner_t)
            if not cone_contains(Site((0,) * box.d, 0), z, slope, direction):
                raise UsageError(f"statistic box {box} leaves the {direction} cone")


def random_battery_pair(env_config, pair_seed: int, time_depth: int = 8,
                        pilot_n: int = 200) -> Tuple[BoxFunctional, BoxFunctional]:
    """A randomized (past, future) statistic pair with balanced marginals.

    Boxes are drawn inside the depth-limited cones; candidate functionals
    whose pilot acceptance rate is too lopsided are redrawn so the
    independence tests keep reasonable power and calibration.
    """
    gen = np.random.default_rng(pair_seed)
    past_fields = ["vacant", "occupied", "regen"]
    if isinstance(env_config, RenewalConfig):
        past_fields.append("restart")
    for attempt in range(40):
        past = _random_stat(gen, env_config, "past", time_depth, past_fields)
        future = _random_stat(gen, env_config, "future", time_depth,
                              ["vacant", "occupied"])
        counts = _pair_counts(env_config, past, future, pilot_n,
                              rng.derive(pair_seed, 9, attempt), conditioned=True)
        pa = counts[1, :].sum() / pilot_n
        pb = counts[:, 1].sum() / pilot_n
        if 0.1 <= pa <= 0.9 and 0.1 <= pb <= 0.9:
            return past, future
    return past, future  # fall through with the last candidate


def _random_stat(gen, env_config, direction: str, depth: int, fields) -> BoxFunctional:
    R = env_config.cone_slope
    while True:
        t1 = int(gen.integers(1, depth + 1))
        t2 = int(gen.integers(t1, min(depth, t1 + 3) + 1))
        reach = R * t1
        a = int(gen.integers(-reach, reach + 1))
        b = int(gen.integers(a, min(reach, a + 4) + 1))
        if direction == "past":
            box = Box((a, -t2), (b, -t1))
        else:
            box = Box((a, t1), (b, t2))
        field_name = str(gen.choice(fields))
        n_sites = box.n_sites()
        if field_name == "regen" and n_sites > 4:
            continue
        reducer = str(gen.choice(["all_zero", "any_one", "parity", "count_ge"]))
        threshold = int(gen.integers(1, max(2, n_sites // 2 + 1)))
        return BoxFunctional(box, field_name, reducer, threshold)


@dataclass
class BatteryResult:
    n_pairs: int
    n_rejected: int
    n_inconclusive: int
    level: float
    p_values: list
    rejected_fraction: float
    reports: list = field(default_factory=list)


def rmp_battery(env_config, n_pairs: int, n_per_pair: int, seed: int,
                level: float = 0.05, time_depth: int = 8) -> BatteryResult:
    """Randomized RMP battery: the fraction of pairs rejected at the given
    level should sit in the binomial band around the level when the
    conditional independence actually holds."""
    reports = []
    rejected = 0
    inconclusive = 0
    for i in range(n_pairs):
        pair_seed = rng.derive(seed, i)
        past, future = random_battery_pair(env_config, pair_seed, time_depth)
        report = rmp_test(env_config, past, future, n_per_pair,
                          rng.derive(pair_seed, 1), conditioned=True)
        reports.append(report)
        if report.inconclusive:
            inconclusive += 1
        elif report.p_value < level:
            rejected += 1
    return BatteryResult(n_pairs, rejected, inconclusive, level,
                         [r.p_value for r in reports], rejected / n_pairs,
                         reports)


def rmp_positive_control(env_config: BooleanConfig, n: int, seed: int,
                         n_reps: int = 25, level: float = 0.05,
                         height: int = 4) -> dict:
    """Engineered dependent pair: unconditioned occupancy of two vertically
    stacked boxes near the origin, both often covered by one tall ball.
    Returns the Monte Carlo power of the independence test."""
    past = BoxFunctional(Box((0, -height), (0, -1)), "occupied", "any_one")
    future = BoxFunctional(Box((0, 1), (0, height)), "occupied", "any_one")
    hits = 0
    for rep in range(n_reps):
        report = rmp_test(env_config, past, future, n, rng.derive(seed, rep),
                          conditioned=False)
        if not report.inconclusive and report.p_value < level:
            hits += 1
    return {"power": hits / n_reps, "n_reps": n_reps, "n": n, "level": level}
