"""Binomial intervals and bootstrap helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

Z95 = float(norm.ppf(0.975))
BOOTSTRAP_RESAMPLES = 1000


@dataclass(frozen=True)
class Estimate:
    value: float
    lo: float
    hi: float
    n: int
    successes: int = 0

    @property
    def se(self) -> float:
        if self.n == 0:
            return 0.0
        p = self.value
        return math.sqrt(max(p * (1.0 - p), 0.0) / self.n)


def wilson(successes: int, n: int, z: float = Z95) -> Estimate:
    """Proportion with its Wilson score interval."""
    if n <= 0:
        return Estimate(0.0, 0.0, 1.0, 0, 0)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return Estimate(p, lo, hi, n, int(successes))


def percentile_ci(samples: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    a = (1.0 - level) / 2.0
    x = np.asarray(samples, dtype=np.float64)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return (math.nan, math.nan)
    return float(np.quantile(x, a)), float(np.quantile(x, 1.0 - a))
