from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bfs_components, same_partition, small_realization
from rcmperc import (CubeGrid, build, components, down_graph, duality_check, event_B_r, up_graph, vietoris_rips,
                     window_for_radius)
from rcmperc.graphs import UnionFind, cluster_reach, event_B_r_unchecked
from rcmperc.sampler import from_points

VR3 = vietoris_rips(0.3, alpha=3, D=0.8)


def bowtie():
    W = window_for_radius(1.0, CubeGrid(2, 0.8), 0.8)
    pts = [[0.5, 0.2], [0.5, -0.2], [-0.5, 0.2], [-0.5, -0.2]]
    return build(from_points(W, pts, with_origin=True), vietoris_rips(0.3, alpha=2, D=0.8))


def test_bowtie_counts():
    cx = bowtie()
    g0 = up_graph(cx, 0)
    assert (g0.n, len(g0.edges)) == (5, 6)
    assert components(g0).count == 1
    g1 = up_graph(cx, 1)
    assert (g1.n, len(g1.edges)) == (6, 6)
    assert components(g1).histogram() == {3: 2}
    # edges sharing a vertex: C(4, 2) at the centre plus one pair at each wing vertex
    assert len(down_graph(cx, 0).edges) == 6 + 4
    # the two triangles share no edge
    assert len(down_graph(cx, 1).edges) == 0


def test_bowtie_down_graph_brute():
    cx = bowtie()
    edges = [tuple(e) for e in cx.faces(1).tolist()]
    brute = {(a, b) for a, b in itertools.combinations(range(len(edges)), 2) if set(edges[a]) & set(edges[b])}
    assert down_graph(cx, 0).edge_set() == brute


def brute_up(cx, q):
    qs = [tuple(r) for r in cx.faces(q).tolist()]
    upper = set(map(tuple, cx.faces(q + 1).tolist()))
    return {(a, b) for a, b in itertools.combinations(range(len(qs)), 2)
            if tuple(sorted(set(qs[a]) | set(qs[b]))) in upper}


@given(st.integers(0, 10**6), st.sampled_from([0, 1, 2]))
@settings(max_examples=40, deadline=None)
def test_up_graph_matches_definition(seed, q):
    cx = build(small_realization(seed, beta=5.0, r=1.0), VR3)
    g = up_graph(cx, q)
    assert g.edge_set() == brute_up(cx, q)
    assert len(g.edges) == len(g.edge_set())
    assert same_partition(g.labels.tolist(), bfs_components(g.n, g.edges.tolist()))


@given(st.integers(0, 10**6), st.sampled_from([0, 1]))
@settings(max_examples=40, deadline=None)
def test_duality(seed, q):
    cx = build(small_realization(seed, beta=5.0, r=1.5), VR3)
    assert duality_check(cx, q)


def brute_B_r(cx, q, r):
    qs = [tuple(s) for s in cx.faces(q).tolist()]
    P = cx.vertices.positions
    o = cx.vertices.origin
    lab = bfs_components(len(qs), brute_up(cx, q))
    src = {lab[k] for k, s in enumerate(qs)
           if o in s and max(np.linalg.norm(P[a] - P[b]) for a in s for b in s) <= cx.D}
    return any(lab[k] in src and any(np.linalg.norm(P[v]) > r for v in s) for k, s in enumerate(qs))


@given(st.integers(0, 10**6), st.sampled_from([0, 1]), st.floats(0.3, 1.5))
@settings(max_examples=60, deadline=None)
def test_event_matches_brute_and_reach(seed, q, r):
    cx = build(small_realization(seed, beta=5.0, r=1.5), VR3)
    v = event_B_r(cx, q, r)
    assert v.occurred == brute_B_r(cx, q, r)
    assert v.occurred == (cluster_reach(cx, q) > r)


def test_witness_is_a_path():
    for seed in range(50):
        cx = build(small_realization(seed, beta=6.0, r=1.5), VR3)
        v = event_B_r(cx, 0, 1.0)
        if v.occurred:
            break
    assert v.occurred and v.witness
    ids = {tuple(x) for x in cx.vertices.ids.tolist()}
    assert all(set(s) <= ids for s in v.witness)
    origin_id = (0, int(cx.vertices.rank[cx.vertices.origin]))
    assert origin_id in v.witness[0]
    far = [np.linalg.norm(cx.vertices.positions[cx.vertices.ids.tolist().index(list(x))]) for x in v.witness[-1]]
    assert max(far) > 1.0


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_level_monotonicity(seed):
    cx = build(small_realization(seed, beta=6.0, r=1.5), VR3)
    assert cluster_reach(cx, 1) <= cluster_reach(cx, 0) + 1e-12


def test_event_requires_covering_window():
    cx = build(small_realization(0, r=1.0), VR3)
    with pytest.raises(ValueError):
        event_B_r(cx, 0, 3.0)
    event_B_r_unchecked(cx, 0, 3.0)


def test_event_requires_origin():
    cx = build(small_realization(0, origin=False), VR3)
    with pytest.raises(ValueError):
        event_B_r(cx, 0, 1.0)


def test_component_csv_schema():
    csv = components(up_graph(bowtie(), 1)).to_csv()
    assert csv.splitlines() == ["component_size,count", "3,2"]


def test_union_find():
    uf = UnionFind(0)
    for _ in range(5):
        uf.add()
    uf.union(0, 1)
    uf.union(3, 4)
    uf.union(1, 4)
    assert uf.find(0) == uf.find(3)
    assert uf.find(2) != uf.find(0)
