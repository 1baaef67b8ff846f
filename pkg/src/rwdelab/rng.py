"""Counter-based random streams.

Every random quantity in this package is a pure function of a 64-bit seed
and a tuple of integer key words (stream tag, lattice coordinates, draw
index).  That gives lazily evaluable infinite environments, reproducible
runs at any parallelism level, and coupled walks that share per-site noise.

The mixer is the splitmix64 finalizer chained over the key words.  Three
equivalent implementations are provided: plain python (arbitrary ints),
numpy (vectorized over arrays), and the numba-friendly scalar used inside
compiled kernels (see _kernels.py).  They must agree bit for bit; the test
suite checks that.
"""

from __future__ import annotations

import numpy as np

U64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

# Stream tags.  Distinct tags give independent streams off one seed.
TAG_DERIVE = 0x01
TAG_WALK_U = 0x02
TAG_BOOL_CELL = 0x03
TAG_REN_NOISE = 0x04
TAG_PERM = 0x05
TAG_BOOT = 0x06


def _mix(z: int) -> int:
    z &= U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64
    return z ^ (z >> 31)


def hash_words(seed: int, *words: int) -> int:
    """64-bit hash of (seed, words); the core counter-based generator."""
    h = _mix((seed & U64) ^ GOLDEN)
    for w in words:
        h = _mix((h + GOLDEN + (w & U64)) & U64)
    return h


def u01(seed: int, *words: int) -> float:
    """Deterministic uniform in [0, 1) keyed by (seed, words)."""
    return (hash_words(seed, *words) >> 11) * 2.0**-53


def derive(seed: int, *words: int) -> int:
    """Derived child seed; the splittable part of the scheme.

    Master seed -> per-subcommand stream -> per-sample stream all go
    through here, so adding samples never perturbs existing ones.
    """
    return hash_words(seed, TAG_DERIVE, *words)


def _as_u64(a) -> np.ndarray:
    # two's complement reinterpretation for signed inputs
    return np.asarray(a).astype(np.int64).view(np.uint64)


def hash_words_vec(seed: int, *word_arrays) -> np.ndarray:
    """Vectorized hash_words; arrays broadcast together."""
    arrs = np.broadcast_arrays(*[_as_u64(a) for a in word_arrays])
    h = np.uint64(_mix((seed & U64) ^ GOLDEN))
    h = np.broadcast_to(h, arrs[0].shape).copy()
    g = np.uint64(GOLDEN)
    with np.errstate(over="ignore"):
        for w in arrs:
            z = h + g + w
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h = z ^ (z >> np.uint64(31))
    return h


def u01_vec(seed: int, *word_arrays) -> np.ndarray:
    return (hash_words_vec(seed, *word_arrays) >> np.uint64(11)) * 2.0**-53


def poisson_from_stream(lam: float, seed: int, *words: int) -> int:
    """Poisson(lam) drawn by Knuth's product method off a keyed stream.

    Draw i of the stream is u01(seed, *words, i); the count is the number
    of uniforms needed for their product to drop below exp(-lam).
    """
    if lam <= 0.0:
        return 0
    limit = np.exp(-lam)
    prod = 1.0
    k = 0
    while True:
        prod *= u01(seed, *words, k)
        if prod < limit:
            return k
        k += 1


def pmf_to_cdf(pmf: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(np.asarray(pmf, dtype=np.float64))
    cdf[-1] = 1.0
    return cdf


def sample_cdf(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF lookup with the half-open convention: result k has
    cdf[k-1] <= u < cdf[k]."""
    return int(np.searchsorted(cdf, u, side="right"))
