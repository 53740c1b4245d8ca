"""Counter-based random number primitives (splitmix64 family).

Every stochastic component in the package draws from hash streams built
out of the splitmix64 finalizer, so results are reproducible across
platforms, execution orders and worker counts. Cascade simulations key
each Bernoulli draw on (run seed, arc index): an arc is attempted at most
once per cascade, which makes the draw assignment independent of the
order in which the frontier is processed. The numba kernels re-implement
the same integer arithmetic with uint64 wraparound; the two must agree
bit for bit.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# splitmix64 finalizer constants
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
# stream-combination constants
GOLDEN = 0x9E3779B97F4A7C15
_C3 = 0x632BE59BD9B4E019
ARC_SALT = 0xD6E8FEB86659FD93

RNG_NAME = "splitmix64-v1"


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def combine(h: int, v: int) -> int:
    """Fold value ``v`` into hash state ``h``; avalanches via mix64."""
    return mix64(((h ^ (v & MASK64)) * GOLDEN + _C3) & MASK64)


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from an ordered tuple of integers."""
    h = mix64(parts[0])
    for v in parts[1:]:
        h = combine(h, v)
    return h


def arc_uniform(run_seed: int, arc_index: int) -> float:
    """Uniform [0,1) draw for one arc attempt within one cascade run."""
    u = mix64((run_seed ^ ((arc_index + 1) * ARC_SALT)) & MASK64)
    return (u >> 11) * 2.0**-53


def arc_uniform_array(run_seed: int, arc_indices: np.ndarray) -> np.ndarray:
    """Vectorised ``arc_uniform`` over an int64 array of arc indices."""
    z = (arc_indices.astype(np.uint64) + np.uint64(1)) * np.uint64(ARC_SALT)
    z ^= np.uint64(run_seed & MASK64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def numpy_generator(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator for non-kernel randomness (sampling, splits)."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))
