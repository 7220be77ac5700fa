"""Cube-revealment exploration deciding B_r, and Monte Carlo OSSS terms.

The exploration first reveals the cubes within D of the sphere of radius s,
then keeps revealing any unrevealed cube within D of a q-simplex (diam <= D)
whose G_q-component in the revealed complex (without the origin) meets the
sphere, i.e. holds a vertex with norm <= s and one with norm > s.  The
decision is B_r evaluated on the revealed part of the complex with origin.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .complex import Complex, build
from .connection import ConnectionFamily
from .geometry import CubeGrid, Window, batch_diam, box_sphere_distance, window_for_radius
from .graphs import UnionFind, cluster_reach, event_B_r_unchecked, origin_cluster
from .parallel import run_indexed
from .rng import TAG_BOOTSTRAP, TAG_REPLICATE, derive_seed
from .sampler import Realization, replace_cube, sample
from .stats import BOOTSTRAP_RESAMPLES, Estimate, wilson

log = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def _window(r: float, grid: CubeGrid, D: float) -> Window:
    return window_for_radius(r, grid, D)


@dataclass
class ExplorationTrace:
    s: float
    r: float
    q: int
    initial: list[int]
    revealed: list[int]
    frontier_sizes: list[int]
    decision: bool

    @property
    def revealed_set(self) -> frozenset[int]:
        return frozenset(self.revealed)

    def to_json(self) -> str:
        n0 = len(self.initial)
        steps = [{"step": k, "cube": c, "frontier": f}
                 for k, (c, f) in enumerate(zip(self.revealed[n0:], self.frontier_sizes[1:]), start=1)]
        doc = {"s": self.s, "r": self.r, "q": self.q, "initial": self.initial,
               "initial_frontier": self.frontier_sizes[0], "steps": steps, "decision": self.decision}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@lru_cache(maxsize=128)
def initial_cubes(window: Window, s: float, D: float) -> tuple[int, ...]:
    """T_0: cubes whose closed box lies within D of the sphere of radius s."""
    grid = window.grid
    out = []
    for i in window.indices:
        lo, hi = grid.bounds(i)
        if box_sphere_distance(lo, hi, s) <= D:
            out.append(i)
    return tuple(out)


_OFFSETS: dict[int, np.ndarray] = {}


def _offsets(d: int) -> np.ndarray:
    if d not in _OFFSETS:
        _OFFSETS[d] = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
    return _OFFSETS[d]


@lru_cache(maxsize=128)
def _neighbour_table(window: Window) -> np.ndarray:
    """(len(window), 3^d) indices of the lattice neighbours of each cube, -1 outside the window."""
    grid = window.grid
    offs = _offsets(grid.d)
    table = np.full((len(window), len(offs)), -1, dtype=np.int64)
    for a, z in enumerate(window.zs):
        for b, off in enumerate(offs):
            i = grid.index_of(z + off)
            if i in window:
                table[a, b] = i
    return table


def _near_cubes(pos: np.ndarray, cube: np.ndarray, window: Window, D: float) -> list[list[int]]:
    """Per point, the window cubes whose closed box is within D (t = D, so 3^d neighbours suffice)."""
    grid = window.grid
    table = _neighbour_table(window)
    slot = np.searchsorted(np.asarray(window.indices, dtype=np.int64), cube)
    offs = _offsets(grid.d)
    z = window.zs[slot]
    lo = grid.side * (z[:, None, :] + offs[None, :, :]) - grid.t
    gap = np.maximum(np.maximum(lo - pos[:, None, :], 0.0), pos[:, None, :] - (lo + grid.side))
    ok = (np.sqrt((gap**2).sum(-1)) <= D) & (table[slot] >= 0)
    nb = table[slot]
    return [nb[k][ok[k]].tolist() for k in range(len(pos))]


def _group_by_cube(rows: np.ndarray, cube_of: np.ndarray) -> tuple[np.ndarray, dict[int, list[int]]]:
    """Distinct-cube count per row and, per cube, the rows touching it."""
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64), {}
    cubes = np.sort(cube_of[rows], axis=1)
    distinct = np.ones_like(cubes, dtype=bool)
    distinct[:, 1:] = cubes[:, 1:] != cubes[:, :-1]
    count = distinct.sum(1).astype(np.int64)
    rk = np.broadcast_to(np.arange(len(rows))[:, None], cubes.shape)[distinct]
    ck = cubes[distinct]
    order = np.lexsort((rk, ck))
    rk, ck = rk[order], ck[order]
    groups: dict[int, list[int]] = {}
    if len(ck):
        cut = np.r_[0, np.nonzero(np.diff(ck))[0] + 1, len(ck)]
        for a, b in zip(cut[:-1], cut[1:]):
            groups[int(ck[a])] = rk[a:b].tolist()
    return count, groups


def explore(realization: Realization, family: ConnectionFamily, q: int, r: float, s: float,
            order: str = "smallest", order_seed: int = 0, complex_: Complex | None = None) -> ExplorationTrace:
    """Run the exploration on W^(r); ``order`` picks among eligible cubes
    ("smallest", "largest" or "random")."""
    if not 0 < s <= r:
        raise ValueError("need 0 < s <= r")
    D = family.D
    grid = realization.window.grid
    if grid.t != D:
        raise ValueError("grid half-width must equal D")
    if not realization.has_origin:
        raise ValueError("exploration needs the realization with the origin")
    if s < D:
        log.warning("s = %g < D = %g: the revealed region may not determine B_r", s, D)
    Ir = _window(float(r), grid, D)
    if not Ir.issubset(realization.window):
        raise ValueError("realization does not cover W^(r)")
    real = realization if realization.window == Ir else realization.restrict(Ir)
    cx0 = complex_ if complex_ is not None else build(real, family, alpha=q + 1)
    cx = cx0.without_origin()
    v = cx.vertices
    norms = np.linalg.norm(v.positions, axis=1)
    inside = norms <= s
    near = _near_cubes(v.positions, v.cube, Ir, D)

    qs = cx.faces(q)
    qs_ok = np.ones(len(qs), dtype=bool) if q == 0 else batch_diam(v.positions[qs]) <= D
    up = cx.faces(q + 1)
    qidx = cx.index(q)
    if len(up):
        fac = np.stack([qidx.find(up[:, [c for c in range(q + 2) if c != drop]])
                        for drop in range(q + 2)], axis=1)
    else:
        fac = np.zeros((0, q + 2), dtype=np.int64)

    # a simplex becomes available once every cube holding one of its vertices is revealed
    pending_q, q_of_cube = _group_by_cube(qs, v.cube)
    pending_up, up_of_cube = _group_by_cube(up, v.cube)
    pending_q, pending_up = pending_q.tolist(), pending_up.tolist()

    fac_list = fac.tolist()
    uf = UnionFind(len(qs))
    has_in = inside[qs].any(axis=1).tolist()
    has_out = (~inside[qs]).any(axis=1).tolist()
    members: list[list[int]] = [[k] for k in range(len(qs))]
    active = [False] * len(qs)
    qs_list = qs.tolist()
    qs_ok = qs_ok.tolist()
    frontier = 0
    revealed: list[int] = []
    revealed_set: set[int] = set()
    eligible: set[int] = set()
    in_window = Ir.index_set
    rng = np.random.default_rng(order_seed)

    def mark(k: int):
        nonlocal frontier
        if not qs_ok[k]:
            return
        frontier += 1
        for vtx in qs_list[k]:
            for c in near[vtx]:
                if c not in revealed_set and c in in_window:
                    eligible.add(c)

    def crossing(root: int) -> bool:
        return has_in[root] and has_out[root]

    def attach(a: int, b: int):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            return
        ca, cb = crossing(ra), crossing(rb)
        root = uf.union(ra, rb)
        other = rb if root == ra else ra
        has_in[root] = has_in[root] or has_in[other]
        has_out[root] = has_out[root] or has_out[other]
        now = crossing(root)
        if now:
            if not ca:
                for k in members[ra]:
                    if active[k]:
                        mark(k)
            if not cb:
                for k in members[rb]:
                    if active[k]:
                        mark(k)
        members[root].extend(members[other])
        members[other] = []

    def reveal(c: int):
        revealed.append(c)
        revealed_set.add(c)
        eligible.discard(c)
        for k in q_of_cube.get(c, ()):
            pending_q[k] -= 1
            if pending_q[k] == 0:
                active[k] = True
                if crossing(uf.find(k)):
                    mark(k)
        for k in up_of_cube.get(c, ()):
            pending_up[k] -= 1
            if pending_up[k] == 0:
                f = fac_list[k]
                for a in f[1:]:
                    attach(f[0], a)

    T0 = initial_cubes(Ir, float(s), float(D))
    for c in T0:
        reveal(c)
    sizes = [frontier]
    while eligible:
        if order == "smallest":
            c = min(eligible)
        elif order == "largest":
            c = max(eligible)
        elif order == "random":
            c = sorted(eligible)[int(rng.integers(len(eligible)))]
        else:
            raise ValueError(f"unknown order {order!r}")
        reveal(c)
        sizes.append(frontier)

    keep = np.isin(cx0.vertices.cube, np.fromiter(revealed_set, dtype=np.int64, count=len(revealed_set)))
    sub = cx0.subcomplex(keep)
    decision = bool(sub.vertices.has_origin) and event_B_r_unchecked(sub, q, r, D, witness=False).occurred
    return ExplorationTrace(float(s), float(r), q, list(T0), revealed, sizes, decision)


def replicate_seed(master_seed: int, k: int, *extra: int) -> int:
    return derive_seed(master_seed, TAG_REPLICATE, *extra, k)


def _realize(seed: int, beta: float, family: ConnectionFamily, window: Window,
             replicas: dict[int, int] | None = None) -> Realization:
    return sample(seed, beta, window, family.mark_law, with_origin=True, replicas=replicas)


def _reach(real: Realization, family: ConnectionFamily, q: int) -> float:
    return cluster_reach(build(real, family, alpha=q + 1), q)


def _check_cube(i: int, window: Window):
    if i not in window:
        raise ValueError(f"cube {i} is not in I_r")


def revealment(beta: float, family: ConnectionFamily, q: int, r: float, s: float, i: int,
               n_samples: int, master_seed: int, threads: int = 1, d: int = 2) -> Estimate:
    """Fraction of explorations that reveal cube i, with a Wilson interval."""
    W = _window(float(r), CubeGrid(d, family.D), family.D)
    _check_cube(i, W)

    def one(k: int) -> bool:
        real = _realize(replicate_seed(master_seed, k), beta, family, W)
        return i in explore(real, family, q, r, s).revealed_set

    hits = run_indexed(one, range(n_samples), threads)
    return wilson(int(sum(hits)), n_samples)


def _resampled_reach(base: Realization, family: ConnectionFamily, q: int, i: int) -> float:
    return _reach(replace_cube(base, i), family, q)


@dataclass
class InfluenceEstimate:
    flip: Estimate
    rise: Estimate

    @property
    def value(self) -> float:
        return self.flip.value


def influence(beta: float, family: ConnectionFamily, q: int, r: float, i: int, n_samples: int,
              master_seed: int, threads: int = 1, d: int = 2) -> InfluenceEstimate:
    """P(B_r changes when cube i is replaced by an independent copy).

    ``rise`` counts the one-sided change (absent before, present after).
    """
    W = _window(float(r), CubeGrid(d, family.D), family.D)
    _check_cube(i, W)

    def one(k: int) -> tuple[bool, bool]:
        seed = replicate_seed(master_seed, k)
        base = _realize(seed, beta, family, W)
        before = _reach(base, family, q) > r
        after = _resampled_reach(base, family, q, i) > r
        return before != after, (not before) and after

    res = run_indexed(one, range(n_samples), threads)
    return InfluenceEstimate(wilson(sum(a for a, _ in res), n_samples),
                             wilson(sum(b for _, b in res), n_samples))


def influence_candidates(cx: Complex, q: int, window: Window) -> list[int]:
    """Cubes whose resampling can change B_r: those within D of the origin's cluster."""
    mask = origin_cluster(cx, q)
    verts = np.unique(np.r_[cx.faces(q)[mask].ravel(), [cx.vertices.origin]]).astype(np.int64)
    near = _near_cubes(cx.vertices.positions[verts], cx.vertices.cube[verts], window, cx.D)
    return sorted({c for lst in near for c in lst})


@dataclass
class OsssResult:
    beta: float
    q: int
    r: float
    s: float
    n: int
    theta: Estimate
    lhs: float
    rhs: float
    margin: float
    se: float
    cubes: list[int]
    revealment: np.ndarray
    influence: np.ndarray

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 3.0 * self.se

    def summary(self) -> dict:
        return {"beta": self.beta, "q": self.q, "r": self.r, "s": self.s, "n": self.n,
                "theta_hat": self.theta.value, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "se": self.se, "holds": self.holds}


def osss_check(beta: float, family: ConnectionFamily, q: int, r: float, s: float, n_samples: int,
               master_seed: int, threads: int = 1, d: int = 2) -> OsssResult:
    """Both sides of theta(1 - theta) <= sum_i delta_i(s) zeta_i from one set of samples."""
    if not 0 < s <= r:
        raise ValueError("need 0 < s <= r")
    W = _window(float(r), CubeGrid(d, family.D), family.D)
    cubes = list(W.indices)
    slot = {c: k for k, c in enumerate(cubes)}

    def one(k: int):
        seed = replicate_seed(master_seed, k)
        real = _realize(seed, beta, family, W)
        cx = build(real, family, alpha=q + 1)
        before = cluster_reach(cx, q) > r
        trace = explore(real, family, q, r, s, complex_=cx)
        flips = []
        for i in influence_candidates(cx, q, W):
            if (_resampled_reach(real, family, q, i) > r) != before:
                flips.append(i)
        return before, sorted(trace.revealed_set), flips

    res = run_indexed(one, range(n_samples), threads)
    B = np.array([b for b, _, _ in res], dtype=np.float64)
    R = np.zeros((n_samples, len(cubes)), dtype=np.float32)
    F = np.zeros((n_samples, len(cubes)), dtype=np.float32)
    for k, (_, rev, fl) in enumerate(res):
        R[k, [slot[c] for c in rev]] = 1.0
        F[k, [slot[c] for c in fl]] = 1.0
    theta = wilson(int(B.sum()), n_samples)
    delta, zeta = R.mean(0), F.mean(0)
    lhs = theta.value * (1.0 - theta.value)
    rhs = float((delta.astype(np.float64) * zeta).sum())
    rng = np.random.default_rng(derive_seed(master_seed, TAG_BOOTSTRAP))
    margins = np.empty(BOOTSTRAP_RESAMPLES)
    for b in range(BOOTSTRAP_RESAMPLES):
        idx = rng.integers(0, n_samples, n_samples)
        th = B[idx].mean()
        margins[b] = float((R[idx].mean(0).astype(np.float64) * F[idx].mean(0)).sum()) - th * (1.0 - th)
    se = float(margins.std(ddof=1)) if n_samples > 1 else 0.0
    return OsssResult(float(beta), q, float(r), float(s), n_samples, theta, lhs, rhs, rhs - lhs, se,
                      cubes, delta, zeta)
