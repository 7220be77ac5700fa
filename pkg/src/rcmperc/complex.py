"""Random simplicial complex built from a realization by the acceptance rule.

A candidate j-simplex sigma is stored iff every proper face of size >= 2 is
stored and u(sigma) <= phi_j(sigma).  Candidates are grown dimension by
dimension: pairs within distance D first, then each stored (j-1)-simplex is
extended by upper neighbours of its last vertex, and kept only when all of
its facets are already stored.  Edges longer than D are never stored (phi_1
times 1{|x - y| <= D}); under the declared cutoff this does not change any
q-graph beyond removing isolated vertices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .connection import ConnectionFamily
from .geometry import Window
from .rng import simplex_uniforms
from .sampler import Realization


class RowIndex:
    """Membership lookup for rows of sorted vertex-index tuples."""

    def __init__(self, rows: np.ndarray, n: int):
        rows = np.asarray(rows, dtype=np.int64)
        self.width = rows.shape[1] if rows.ndim == 2 else 1
        self.n = max(int(n), 1)
        self._packed = self.n ** self.width < 2**62
        if self._packed:
            self.keys = self.encode(rows)
            self.order = np.argsort(self.keys, kind="stable")
            self.sorted_keys = self.keys[self.order]
        else:
            self.lookup = {tuple(r): i for i, r in enumerate(rows.tolist())}

    def encode(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.width)
        key = np.zeros(len(rows), dtype=np.int64)
        for c in range(self.width):
            key = key * self.n + rows[:, c]
        return key

    def find(self, rows: np.ndarray) -> np.ndarray:
        """Row positions, -1 where absent."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.width)
        if not self._packed:
            return np.array([self.lookup.get(tuple(r), -1) for r in rows.tolist()], dtype=np.int64)
        if len(self.sorted_keys) == 0:
            return np.full(len(rows), -1, dtype=np.int64)
        k = self.encode(rows)
        pos = np.searchsorted(self.sorted_keys, k)
        pos = np.minimum(pos, len(self.sorted_keys) - 1)
        hit = self.sorted_keys[pos] == k
        return np.where(hit, self.order[pos], -1)

    def contains(self, rows: np.ndarray) -> np.ndarray:
        return self.find(rows) >= 0


def _lexsort_rows(rows: np.ndarray) -> np.ndarray:
    if len(rows) == 0:
        return rows
    n = int(rows.max()) + 1
    if n ** rows.shape[1] < 2**62:
        key = np.zeros(len(rows), dtype=np.int64)
        for c in range(rows.shape[1]):
            key = key * n + rows[:, c]
        return rows[np.argsort(key, kind="stable")]
    order = np.lexsort(tuple(rows[:, c] for c in reversed(range(rows.shape[1]))))
    return rows[order]


@dataclass
class Complex:
    """Simplices per dimension as sorted (k, j+1) vertex-index arrays.

    Vertex indices point into ``vertices`` (a Realization sorted by (m, l)),
    so index order equals id order.
    """

    vertices: Realization
    family: ConnectionFamily
    alpha: int
    D: float
    simplices: list[np.ndarray]
    edge_cutoff_applied: bool = False
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def window(self) -> Window:
        return self.vertices.window

    @property
    def n(self) -> int:
        return self.vertices.n

    def faces(self, j: int) -> np.ndarray:
        if j < 0:
            raise ValueError("dimension must be >= 0")
        if j > self.alpha:
            return np.zeros((0, j + 1), dtype=np.int64)
        return self.simplices[j]

    def index(self, j: int) -> RowIndex:
        if j not in self._index:
            self._index[j] = RowIndex(self.faces(j), self.n)
        return self._index[j]

    def simplex_sets(self) -> dict[int, set[tuple[int, ...]]]:
        return {j: set(map(tuple, self.simplices[j].tolist())) for j in range(self.alpha + 1)}

    def id_sets(self) -> dict[int, set[tuple[tuple[int, int], ...]]]:
        """Simplices keyed by vertex ids (m, l), independent of table layout."""
        ids = [tuple(x) for x in self.vertices.ids.tolist()]
        return {j: {tuple(ids[v] for v in row) for row in self.simplices[j].tolist()}
                for j in range(self.alpha + 1)}

    def subcomplex(self, keep: np.ndarray, window: Window | None = None) -> "Complex":
        """Simplices whose vertices all satisfy ``keep`` (ranks unchanged when
        whole cubes are kept)."""
        keep = np.asarray(keep, dtype=bool)
        newidx = np.cumsum(keep) - 1
        verts = self.vertices.subset(keep, window)
        simp = []
        for j, rows in enumerate(self.simplices):
            if j == 0:
                simp.append(np.arange(verts.n, dtype=np.int64).reshape(-1, 1))
                continue
            ok = keep[rows].all(axis=1) if len(rows) else np.zeros(0, dtype=bool)
            simp.append(newidx[rows[ok]].astype(np.int64).reshape(-1, j + 1))
        return Complex(verts, self.family, self.alpha, self.D, simp, self.edge_cutoff_applied)

    def without_origin(self) -> "Complex":
        """Drop the added origin vertex and every simplex containing it."""
        if not self.vertices.has_origin:
            return self
        keep = np.ones(self.n, dtype=bool)
        keep[self.vertices.origin] = False
        sub = self.subcomplex(keep)
        # keep the (m, l) coordinates assigned in the presence of the origin
        sub.vertices.rank = self.vertices.rank[keep]
        return sub

    def to_json(self) -> str:
        v = self.vertices
        fam = self.family.to_dict() if self.family.kind != "custom" else {"kind": "custom"}
        doc = {
            "alpha": self.alpha,
            "D": self.D,
            "d": v.d,
            "family": fam,
            "edge_cutoff_applied": self.edge_cutoff_applied,
            "window": list(v.window.indices),
            "vertices": [
                {"id": [int(v.cube[i]), int(v.rank[i])], "x": [float(c) for c in v.positions[i]],
                 "mark": float(v.marks[i]), "origin": bool(i == v.origin)}
                for i in range(v.n)
            ],
            "simplices": {
                str(j): [[[int(v.cube[k]), int(v.rank[k])] for k in row] for row in self.simplices[j].tolist()]
                for j in range(1, self.alpha + 1)
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _decide(family: ConnectionFamily, real: Realization, j: int, cand: np.ndarray) -> np.ndarray:
    if len(cand) == 0:
        return np.zeros(0, dtype=bool)
    ph = family.phi_batch(j, real.positions[cand], real.marks[cand])
    acc = ph >= 1.0
    frac = np.nonzero((ph > 0.0) & (ph < 1.0))[0]
    if len(frac):
        rows = cand[frac]
        u = simplex_uniforms(real.keys[rows[:, -1]], j, real.ids[rows[:, :-1]])
        acc[frac] = u <= ph[frac]
    return acc


def candidate_pairs(positions: np.ndarray, D: float) -> np.ndarray:
    """All index pairs (i < j) at distance <= D, sorted."""
    if len(positions) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = cKDTree(positions).query_pairs(D, output_type="ndarray").astype(np.int64)
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs.sort(axis=1)
    dist = np.linalg.norm(positions[pairs[:, 0]] - positions[pairs[:, 1]], axis=1)
    return _lexsort_rows(pairs[dist <= D])


def _extend(lower: np.ndarray, lower_index: RowIndex, up_ptr: np.ndarray, up_nbr: np.ndarray) -> np.ndarray:
    """(j)-simplex candidates whose facets all lie in ``lower``."""
    if len(lower) == 0:
        return np.zeros((0, lower.shape[1] + 1), dtype=np.int64)
    last = lower[:, -1]
    deg = up_ptr[last + 1] - up_ptr[last]
    rep = np.repeat(np.arange(len(lower)), deg)
    if len(rep) == 0:
        return np.zeros((0, lower.shape[1] + 1), dtype=np.int64)
    starts = np.repeat(up_ptr[last], deg)
    offs = np.arange(len(rep)) - np.repeat(np.cumsum(deg) - deg, deg)
    w = up_nbr[starts + offs]
    cand = np.concatenate([lower[rep], w[:, None]], axis=1)
    width = lower.shape[1]
    ok = np.ones(len(cand), dtype=bool)
    for drop in range(width):
        cols = [c for c in range(width + 1) if c != drop]
        ok &= lower_index.contains(cand[:, cols])
    return cand[ok]


def build(realization: Realization, family: ConnectionFamily, alpha: int | None = None) -> Complex:
    """Complex on the realization's points (origin included when present)."""
    grid = realization.window.grid
    if grid.t != family.D:
        raise ValueError(f"window grid uses t = {grid.t}, the family cutoff is D = {family.D}")
    alpha = family.alpha if alpha is None else min(alpha, family.alpha)
    n = realization.n
    simp = [np.arange(n, dtype=np.int64).reshape(-1, 1)]
    pairs = candidate_pairs(realization.positions, family.D)
    edges = pairs[_decide(family, realization, 1, pairs)]
    simp.append(edges)
    if alpha >= 2:
        order = np.argsort(edges[:, 0], kind="stable")
        up_nbr = edges[order, 1]
        up_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(up_ptr, edges[:, 0] + 1, 1)
        up_ptr = np.cumsum(up_ptr)
        # rows are lexsorted, so neighbours of each vertex are already ascending
        lower = edges
        for j in range(2, alpha + 1):
            cand = _extend(lower, RowIndex(lower, n), up_ptr, up_nbr)
            lower = _lexsort_rows(cand[_decide(family, realization, j, cand)])
            simp.append(lower)
    cx = Complex(realization, family, alpha, family.D, simp, family.needs_edge_cutoff)
    return cx


def restrict(complex_: Complex, sub_window: Window) -> Complex:
    """Simplices with all vertices inside ``sub_window``."""
    if not isinstance(sub_window, Window) or sub_window.grid != complex_.window.grid:
        raise ValueError("sub-window must be a union of cubes of the complex's grid")
    if not sub_window.issubset(complex_.window):
        raise ValueError("sub-window must lie inside the complex's window")
    keep = np.isin(complex_.vertices.cube, np.asarray(sub_window.indices, dtype=np.int64))
    return complex_.subcomplex(keep, sub_window)


def count_faces(complex_: Complex, j: int) -> int:
    if j < 0 or j > complex_.alpha:
        raise ValueError(f"j must lie in 0..{complex_.alpha}")
    return int(len(complex_.simplices[j]))
