"""Counter-based random streams and binomial confidence intervals.

Every random number in the package is addressed by a key
``(master_seed, sample_index)`` and a counter (usually an encoded lattice
site), so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

_MASK64 = (1 << 64) - 1
_WILSON_Z = stats.norm.ppf(0.975)


def zigzag(k: np.ndarray) -> np.ndarray:
    """Map integers to non-negative integers: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    k = np.asarray(k, dtype=np.int64)
    return np.where(k >= 0, 2 * k, -2 * k - 1).astype(np.uint64)


def site_codes(sites: np.ndarray) -> np.ndarray:
    """Injective encoding of lattice points in Z^d (d <= 3, |k| < 2**20) into uint64."""
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    if np.any(np.abs(sites) >= 1 << 20):
        raise ValueError("lattice coordinates too large for site encoding")
    z = zigzag(sites)
    code = np.zeros(sites.shape[0], dtype=np.uint64)
    for j in range(sites.shape[1]):
        code |= z[:, j] << np.uint64(21 * j)
    return code


def keyed_uniforms(master_seed: int, sample_index: int, codes, size: int = 2) -> np.ndarray:
    """Uniform draws on [0, 1), ``size`` per counter value.

    Row ``i`` depends only on ``(master_seed, sample_index, codes[i])``.
    """
    key = [int(master_seed) & _MASK64, int(sample_index) & _MASK64]
    codes = np.atleast_1d(np.asarray(codes, dtype=np.uint64))
    out = np.empty((codes.size, size))
    for i, c in enumerate(codes):
        gen = np.random.Generator(np.random.Philox(counter=[int(c), 0, 0, 0], key=key))
        out[i] = gen.random(size)
    return out


def derive_seed(master_seed: int, *path: int) -> int:
    """A 64-bit seed derived from a master seed and an integer path."""
    ss = np.random.SeedSequence([int(master_seed) & _MASK64, *[int(p) & _MASK64 for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def wilson_interval(hits: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits <= 0 else max(0.0, centre - half)
    hi = 1.0 if hits >= n else min(1.0, centre + half)
    return float(lo), float(hi)


def mean_interval(values, z: float = _WILSON_Z) -> tuple[float, float, float]:
    """Sample mean with a normal-approximation half-width."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, mean, mean
    half = z * float(values.std(ddof=1)) / math.sqrt(values.size)
    return mean, mean - half, mean + half
