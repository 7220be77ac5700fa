from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from rcmperc.stats import Z95, percentile_ci, wilson


def score_interval(k: int, n: int) -> tuple[float, float]:
    """Roots of |k/n - p| = z sqrt(p (1 - p) / n), found numerically."""
    ph = k / n
    f = lambda p: (ph - p) ** 2 - Z95**2 * p * (1 - p) / n  # noqa: E731
    # f(ph) < 0 inside (0, 1); at ph = 0 or 1 step off the trivial root
    mid = min(max(ph, 1e-12), 1 - 1e-12)
    lo = 0.0 if k == 0 else brentq(f, 1e-15, mid)
    hi = 1.0 if k == n else brentq(f, mid, 1 - 1e-15)
    return lo, hi


def test_wilson_textbook_value():
    e = wilson(5, 10)
    assert (round(e.lo, 4), round(e.hi, 4)) == (0.2366, 0.7634)


@given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
@settings(max_examples=200, deadline=None)
def test_wilson_matches_score_inversion(kn):
    k, n = kn
    e = wilson(k, n)
    lo, hi = score_interval(k, n)
    assert e.lo == pytest.approx(lo, abs=1e-9) and e.hi == pytest.approx(hi, abs=1e-9)
    assert e.lo <= e.value <= e.hi


def test_wilson_edges():
    assert wilson(0, 10).lo == 0.0
    assert wilson(10, 10).hi == 1.0
    assert wilson(0, 10).hi == pytest.approx(Z95**2 / (10 + Z95**2))
    assert wilson(3, 100).se == pytest.approx(math.sqrt(0.03 * 0.97 / 100))


def test_percentile_ci_ignores_nan():
    x = np.r_[np.arange(101.0), [np.nan] * 5]
    assert percentile_ci(x) == pytest.approx((2.5, 97.5))
    assert all(math.isnan(v) for v in percentile_ci(np.array([np.nan])))
