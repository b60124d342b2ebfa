"""Wilson score intervals and replica-level bootstrap helpers."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import PreconditionError


def z_for(confidence: float) -> float:
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def confidence_for(z: float) -> float:
    """Two-sided confidence level of a +-z normal interval (z=3 -> 0.9973)."""
    return math.erf(z / math.sqrt(2.0))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95, z: float | None = None):
    """Wilson score interval for a binomial proportion.

    Parameters
    ----------
    successes, trials : int
        Need ``0 <= successes <= trials`` and ``trials >= 1``.
    confidence : float
        Two-sided level; ignored when ``z`` is given.

    Returns
    -------
    (lo, hi) : tuple of float
    """
    if trials < 1 or not 0 <= successes <= trials or int(successes) != successes:
        raise PreconditionError(f"invalid counts: {successes} successes in {trials} trials")
    if z is None:
        if not 0 < confidence < 1:
            raise PreconditionError(f"confidence must lie in (0, 1), got {confidence}")
        z = z_for(confidence)
    n = float(trials)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def resample_weights(n_items: int, n_boot: int, seed: int) -> np.ndarray:
    """Multinomial replica counts, shape ``(n_boot, n_items)``, one row per resample."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0xB007,))))
    if n_items == 0:
        return np.zeros((n_boot, 0), dtype=np.int64)
    return rng.multinomial(n_items, np.full(n_items, 1.0 / n_items), size=n_boot)


def percentile_interval(samples: np.ndarray, confidence: float = 0.95):
    samples = np.asarray(samples, float)
    samples = samples[np.isfinite(samples)]
    if len(samples) == 0:
        return math.nan, math.nan
    a = (1.0 - confidence) / 2.0
    lo, hi = np.quantile(samples, [a, 1.0 - a])
    return float(lo), float(hi)
