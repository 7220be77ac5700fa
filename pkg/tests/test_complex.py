from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_complex, small_realization
from rcmperc import (CubeGrid, MarkLaw, Window, boolean_balls, build, cech, count_faces, diam_kernel, restrict,
                     sample, vietoris_rips, window_for_radius)
from rcmperc.sampler import from_points

FAMILIES = {
    "vr": vietoris_rips(0.3, alpha=3, D=0.8),
    "cech": cech(0.35, alpha=3, D=0.8),
    "kernel": diam_kernel(["exp:0.4", "const:0.6", "linear:0.9"], D=0.8),
    "boolean": boolean_balls(MarkLaw.uniform_radius(0.1, 0.35), alpha=3, D=0.8),
}


def few_points(seed: int, family):
    W = Window(CubeGrid(2, family.D), (0, 1, 2))
    return sample(seed, 1.2, W, family.mark_law, with_origin=True)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_build_matches_subset_oracle(name):
    fam = FAMILIES[name]
    for seed in range(40):
        real = few_points(seed, fam)
        if real.n > 12:
            continue
        assert build(real, fam).simplex_sets() == brute_complex(real, fam, fam.alpha), seed


def test_vr_vs_cech_on_hand_triangle():
    side = 0.55
    W = Window(CubeGrid(2, 0.8), (0,))
    real = from_points(W, [[0.0, 0.1], [side, 0.1], [side / 2, 0.1 + side * math.sqrt(3) / 2]])
    assert count_faces(build(real, vietoris_rips(0.3, alpha=2, D=0.8)), 2) == 1
    assert count_faces(build(real, cech(0.3, alpha=2, D=0.8)), 2) == 0
    assert count_faces(build(real, cech(0.3, alpha=2, D=0.8)), 1) == 3


def test_counts_on_regular_square():
    # unit-spaced 3x3 grid scaled so that side 0.5 edges connect, diagonals 0.707 do not (2r = 0.6)
    W = window_for_radius(1.0, CubeGrid(2, 0.8), 0.8)
    pts = [[0.5 * i, 0.5 * j] for i in range(-1, 2) for j in range(-1, 2)]
    cx = build(from_points(W, pts), vietoris_rips(0.3, alpha=2, D=0.8))
    assert [count_faces(cx, j) for j in range(3)] == [9, 12, 0]


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_downward_closed(seed):
    fam = FAMILIES["kernel"]
    cx = build(small_realization(seed, beta=3.0, r=1.5, family=fam), fam)
    sets = cx.simplex_sets()
    for j in range(2, cx.alpha + 1):
        for s in sets[j]:
            for drop in range(j + 1):
                assert s[:drop] + s[drop + 1:] in sets[j - 1]


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_no_edge_longer_than_cutoff(seed):
    fam = vietoris_rips(0.5, alpha=1, D=0.8)  # 2r = 1 exceeds D
    cx = build(small_realization(seed, r=1.5, family=fam), fam)
    e = cx.faces(1)
    assert cx.edge_cutoff_applied
    assert np.all(np.linalg.norm(cx.vertices.positions[e[:, 0]] - cx.vertices.positions[e[:, 1]], axis=1) <= 0.8)


@pytest.mark.parametrize("seed", range(10))
def test_restriction_consistency(seed):
    fam = FAMILIES["kernel"]
    g = CubeGrid(2, fam.D)
    big = window_for_radius(3.0, g, fam.D)
    small = window_for_radius(1.0, g, fam.D)
    a = restrict(build(sample(seed, 3.0, big, fam.mark_law, with_origin=True), fam), small)
    b = build(sample(seed, 3.0, small, fam.mark_law, with_origin=True), fam)
    assert a.to_json() == b.to_json()


def test_restrict_rejects_foreign_window():
    fam = FAMILIES["vr"]
    cx = build(small_realization(0, family=fam), fam)
    with pytest.raises(ValueError):
        restrict(cx, Window(CubeGrid(2, 0.5), (0,)))
    with pytest.raises(ValueError):
        restrict(cx, Window(cx.window.grid, (10_000,)))


def test_build_requires_grid_matching_cutoff():
    fam = FAMILIES["vr"]
    real = sample(0, 2.0, Window(CubeGrid(2, 0.5), (0,)))
    with pytest.raises(ValueError):
        build(real, fam)


def test_count_faces_range():
    fam = vietoris_rips(0.3, alpha=2, D=0.8)
    cx = build(small_realization(1, family=fam), fam)
    assert count_faces(cx, 0) == cx.n
    with pytest.raises(ValueError):
        count_faces(cx, 3)


def test_export_is_deterministic_json():
    fam = FAMILIES["cech"]
    a = build(small_realization(4, family=fam), fam).to_json()
    b = build(small_realization(4, family=fam), fam).to_json()
    assert a == b
    doc = json.loads(a)
    assert set(doc["simplices"]) == {"1", "2", "3"}


def test_without_origin_drops_its_simplices():
    fam = FAMILIES["vr"]
    cx = build(small_realization(2, beta=6.0, family=fam), fam)
    plain = cx.without_origin()
    assert plain.n == cx.n - 1
    o = cx.vertices.origin
    for j in range(1, cx.alpha + 1):
        assert count_faces(plain, j) == int((~(cx.faces(j) == o).any(axis=1)).sum())
