from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rcmperc import CubeGrid, MarkLaw, Window, sample, window_for_radius
from rcmperc.rng import derive_seed, simplex_uniforms, to_unit_closed_right
from rcmperc.sampler import from_points, poisson_from_uniform, replace_cube


def test_cube_counts_are_poisson():
    g = CubeGrid(2, 0.5)
    W = Window(g, tuple(range(400)))
    beta = 3.0
    counts = np.concatenate([np.bincount(sample(s, beta, W).cube, minlength=400) for s in range(5)])
    mean = beta * 1.0
    assert counts.mean() == pytest.approx(mean, rel=0.05)
    ks = np.arange(9)
    obs = np.array([np.sum(counts == k) for k in ks[:-1]] + [np.sum(counts >= 8)])
    exp = np.r_[stats.poisson.pmf(ks[:-1], mean), stats.poisson.sf(7, mean)] * len(counts)
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_points_uniform_in_cube():
    g = CubeGrid(2, 1.0)
    real = sample(7, 50.0, Window(g, (0,)))
    for k in range(2):
        assert stats.kstest(real.positions[:, k], stats.uniform(-1, 2).cdf).pvalue > 1e-3


def test_poisson_from_uniform_inverts_cdf():
    u = np.array([0.0, 0.5, 0.999999])
    got = poisson_from_uniform(u, 2.5)
    assert got.tolist() == [int(stats.poisson.ppf(x, 2.5)) if x > 0 else 0 for x in u]


def test_determinism_and_seed_sensitivity():
    W = window_for_radius(2.0, CubeGrid(2, 0.8), 0.8)
    a, b = sample(3, 4.0, W, with_origin=True), sample(3, 4.0, W, with_origin=True)
    assert a.to_csv() == b.to_csv()
    assert sample(4, 4.0, W).to_csv() != a.to_csv()


@given(st.integers(0, 2**32), st.sets(st.integers(0, 48), min_size=1, max_size=20))
@settings(max_examples=40, deadline=None)
def test_restriction_is_sampling_the_subwindow(seed, sub):
    g = CubeGrid(2, 0.8)
    big = Window(g, tuple(range(49)))
    small = Window(g, tuple(sub | {0}))
    r = sample(seed, 3.0, big, with_origin=True).restrict(small)
    s = sample(seed, 3.0, small, with_origin=True)
    assert r.to_csv() == s.to_csv()


def test_marks_follow_law():
    law = MarkLaw.uniform_radius(0.1, 0.3)
    real = sample(1, 20.0, Window(CubeGrid(2, 1.0), tuple(range(9))), law)
    assert real.marks.min() >= 0.1 and real.marks.max() <= 0.3
    assert stats.kstest(real.marks, stats.uniform(0.1, 0.2).cdf).pvalue > 1e-3


@pytest.mark.parametrize("i", [0, 5, 17])
def test_replace_cube_matches_full_resample(i):
    W = window_for_radius(2.0, CubeGrid(2, 0.8), 0.8)
    base = sample(11, 4.0, W, with_origin=True)
    assert replace_cube(base, i).to_csv() == sample(11, 4.0, W, with_origin=True, replicas={i: 1}).to_csv()
    other = replace_cube(base, i)
    keep = base.cube != i
    assert np.array_equal(base.positions[keep], other.positions[other.cube != i])


def test_origin_is_added_in_cube_zero():
    W = window_for_radius(1.0, CubeGrid(2, 0.8), 0.8)
    real = sample(2, 1.0, W, with_origin=True)
    assert real.has_origin and real.cube[real.origin] == 0
    assert np.all(real.positions[real.origin] == 0)


def test_ids_sorted_and_ranks_contiguous():
    real = sample(5, 6.0, window_for_radius(2.0, CubeGrid(2, 0.8), 0.8))
    ids = real.ids
    assert np.all(np.diff(ids[:, 0]) >= 0)
    for c in np.unique(ids[:, 0]):
        assert sorted(ids[ids[:, 0] == c, 1]) == list(range(np.sum(ids[:, 0] == c)))


def test_simplex_uniforms_depend_on_every_vertex():
    keys = np.array([[1, 2]], dtype=np.uint64)
    a = simplex_uniforms(keys, 2, np.array([[[0, 0], [0, 1]]]))
    b = simplex_uniforms(keys, 2, np.array([[[0, 0], [0, 2]]]))
    assert a[0] != b[0]
    assert 0 < a[0] <= 1


def test_unit_draws_are_uniform():
    h = np.array([derive_seed(9, k) for k in range(20000)], dtype=np.uint64)
    u = to_unit_closed_right(h)
    assert u.min() > 0 and u.max() <= 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_from_points_rejects_outside():
    W = Window(CubeGrid(2, 0.5), (0,))
    with pytest.raises(ValueError):
        from_points(W, [[2.0, 0.0]])
