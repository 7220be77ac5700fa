"""q-connectivity graphs on a complex, their components, and the event B_r."""
from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .complex import Complex
from .geometry import CubeGrid, batch_diam, window_for_radius


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n: int = 0):
        self.parent = list(range(n))
        self.size = [1] * n

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.size.append(1)
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a

    def labels(self) -> np.ndarray:
        """Component labels numbered by first appearance."""
        roots = [self.find(i) for i in range(len(self.parent))]
        seen: dict[int, int] = {}
        return np.array([seen.setdefault(r, len(seen)) for r in roots], dtype=np.int64)


@dataclass
class QGraph:
    """Vertices are q-simplices (up) or (q+1)-simplices (down) of a complex."""

    q: int
    mode: str
    simplices: np.ndarray
    edges: np.ndarray
    _labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.simplices)

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            self._labels = component_labels(self.n, self.edges)
        return self._labels

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges.tolist()}

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edges.tolist():
            adj[a].append(b)
            adj[b].append(a)
        return adj


def component_labels(n: int, edges: np.ndarray) -> np.ndarray:
    """Labels numbered by smallest member, so they are canonical."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
    _, lab = connected_components(m, directed=False)
    _, first = np.unique(lab, return_index=True)
    order = np.argsort(first)
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[lab]


def _unique_pairs(pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def _facet_positions(cx: Complex, j: int) -> np.ndarray:
    """(k, j+1) positions in F_{j-1} of the facets of every j-simplex; column c drops vertex c."""
    rows = cx.faces(j)
    if len(rows) == 0:
        return np.zeros((0, j + 1), dtype=np.int64)
    idx = cx.index(j - 1)
    out = np.empty((len(rows), j + 1), dtype=np.int64)
    for drop in range(j + 1):
        cols = [c for c in range(j + 1) if c != drop]
        out[:, drop] = idx.find(rows[:, cols])
    if (out < 0).any():
        raise ValueError("complex is not downward closed")
    return out


def up_graph(cx: Complex, q: int) -> QGraph:
    """G_q: q-simplices joined when their union is a (q+1)-simplex."""
    if not 0 <= q < cx.alpha:
        raise ValueError(f"q must lie in 0..{cx.alpha - 1}")
    fac = _facet_positions(cx, q + 1)
    k = q + 2
    a, b = np.triu_indices(k, 1)
    pairs = np.stack([fac[:, a].ravel(), fac[:, b].ravel()], axis=1)
    # two q-simplices fix their union, so no pair is emitted twice
    return QGraph(q, "up", cx.faces(q), np.sort(pairs, axis=1))


def down_graph(cx: Complex, q: int) -> QGraph:
    """Down-graph on (q+1)-simplices: joined when they share a q-face."""
    if not 0 <= q < cx.alpha:
        raise ValueError(f"q must lie in 0..{cx.alpha - 1}")
    fac = _facet_positions(cx, q + 1)
    if len(fac) == 0:
        return QGraph(q, "down", cx.faces(q + 1), np.zeros((0, 2), dtype=np.int64))
    owner = np.repeat(np.arange(len(fac)), fac.shape[1])
    face = fac.ravel()
    order = np.lexsort((owner, face))
    face, owner = face[order], owner[order]
    pairs = []
    starts = np.r_[0, np.nonzero(np.diff(face))[0] + 1, len(face)]
    for lo, hi in zip(starts[:-1], starts[1:]):
        if hi - lo > 1:
            grp = owner[lo:hi]
            a, b = np.triu_indices(len(grp), 1)
            pairs.append(np.stack([grp[a], grp[b]], axis=1))
    edges = _unique_pairs(np.concatenate(pairs)) if pairs else np.zeros((0, 2), dtype=np.int64)
    return QGraph(q, "down", cx.faces(q + 1), edges)


@dataclass
class Components:
    labels: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return len(self.sizes)

    def histogram(self) -> dict[int, int]:
        vals, cnt = np.unique(self.sizes, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    def largest(self) -> np.ndarray:
        """Member indices of the largest component (smallest label on ties)."""
        if len(self.sizes) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.nonzero(self.labels == int(np.argmax(self.sizes)))[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component_size", "count"])
        for size, count in sorted(self.histogram().items()):
            w.writerow([size, count])
        return buf.getvalue()


def components(g: QGraph) -> Components:
    lab = g.labels
    sizes = np.bincount(lab) if len(lab) else np.zeros(0, dtype=np.int64)
    return Components(lab, sizes.astype(np.int64))


@dataclass
class PercolationVerdict:
    occurred: bool
    q: int
    r: float
    witness: list[tuple[int, ...]] | None = None
    reach: float = 0.0


@lru_cache(maxsize=64)
def _required_window(r: float, grid: CubeGrid) -> frozenset[int]:
    return window_for_radius(r, grid).index_set


def _sources(cx: Complex, q: int, D: float) -> np.ndarray:
    """Positions in F_q of q-simplices containing the origin with diam <= D."""
    o = cx.vertices.origin
    if o < 0:
        return np.zeros(0, dtype=np.int64)
    rows = cx.faces(q)
    hit = np.nonzero((rows == o).any(axis=1))[0]
    if len(hit) == 0 or q == 0:
        return hit
    dm = batch_diam(cx.vertices.positions[rows[hit]])
    return hit[dm <= D]


def origin_cluster(cx: Complex, q: int, D: float | None = None, graph: QGraph | None = None) -> np.ndarray:
    """Mask over F_q of the G_q-components holding an origin source simplex."""
    D = cx.D if D is None else D
    g = graph or up_graph(cx, q)
    src = _sources(cx, q, D)
    if len(src) == 0:
        return np.zeros(g.n, dtype=bool)
    return np.isin(g.labels, np.unique(g.labels[src]))


def cluster_reach(cx: Complex, q: int, D: float | None = None) -> float:
    """Largest vertex norm in the origin's q-cluster (0 when there is none).

    B_r holds exactly when this exceeds r, for every r up to the radius the
    window was built for.
    """
    mask = origin_cluster(cx, q, D)
    if not mask.any():
        return 0.0
    verts = np.unique(cx.faces(q)[mask])
    return float(np.linalg.norm(cx.vertices.positions[verts], axis=1).max())


def _bfs_witness(g: QGraph, src: np.ndarray, target: np.ndarray) -> list[int] | None:
    adj = g.adjacency()
    prev = np.full(g.n, -2, dtype=np.int64)
    dq = deque()
    for s in src.tolist():
        prev[s] = -1
        dq.append(s)
    while dq:
        v = dq.popleft()
        if target[v]:
            path = [v]
            while prev[path[-1]] >= 0:
                path.append(int(prev[path[-1]]))
            return path[::-1]
        for w in adj[v]:
            if prev[w] == -2:
                prev[w] = v
                dq.append(w)
    return None


def event_B_r_unchecked(cx: Complex, q: int, r: float, D: float | None = None,
                        witness: bool = True) -> PercolationVerdict:
    """B_r on whatever complex is given (no window-size check)."""
    D = cx.D if D is None else D
    if not 0 <= q < cx.alpha:
        raise ValueError(f"q must lie in 0..{cx.alpha - 1}")
    g = up_graph(cx, q)
    src = _sources(cx, q, D)
    if len(src) == 0:
        return PercolationVerdict(False, q, r)
    rows = cx.faces(q)
    norms = np.linalg.norm(cx.vertices.positions, axis=1)
    target = (norms[rows] > r).any(axis=1)
    mask = np.isin(g.labels, np.unique(g.labels[src]))
    reach = float(norms[np.unique(rows[mask])].max())
    hit = bool((mask & target).any())
    path = None
    if hit and witness:
        ids = cx.vertices.ids
        chain = _bfs_witness(g, src, target)
        path = [tuple((int(ids[v, 0]), int(ids[v, 1])) for v in rows[k]) for k in chain]
    return PercolationVerdict(hit, q, r, path, reach)


def event_B_r(cx: Complex, q: int, r: float, D: float | None = None, witness: bool = True) -> PercolationVerdict:
    """Origin's q-simplex (diam <= D) is G_q-connected to one leaving B(0, r)."""
    if not cx.vertices.has_origin:
        raise ValueError("B_r needs a complex built with the origin")
    if not r > 0:
        raise ValueError("r must be > 0")
    if not _required_window(float(r), cx.window.grid) <= cx.window.index_set:
        raise ValueError(f"window does not cover every cube meeting B(0, r + D) for r = {r}")
    return event_B_r_unchecked(cx, q, r, D, witness)


def duality_check(cx: Complex, q: int) -> bool:
    """Down-components of F_{q+1} correspond one-to-one to non-singleton G_q components."""
    up = up_graph(cx, q)
    down = down_graph(cx, q)
    if down.n == 0:
        return up.edges.size == 0
    fac = _facet_positions(cx, q + 1)
    up_lab = up.labels[fac]
    if (up_lab != up_lab[:, :1]).any():
        return False
    image: dict[int, int] = {}
    for dl, ul in zip(down.labels.tolist(), up_lab[:, 0].tolist()):
        if image.setdefault(dl, ul) != ul:
            return False
    sizes = np.bincount(up.labels, minlength=1)
    nonsingle = set(np.nonzero(sizes >= 2)[0].tolist())
    values = list(image.values())
    return len(set(values)) == len(values) and set(values) == nonsingle
