"""Cube-local sampling of the marked Poisson process.

Each cube Q_i of a window draws its own point count, positions, stream keys
and mark uniforms from counters keyed by (master_seed, i, replica).  The
points inside a cube therefore never depend on which other cubes are
sampled, which is what makes restriction to sub-windows exact.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import poisson

from .connection import MarkLaw
from .geometry import Window
from .rng import TAG_CUBE, TAG_ORIGIN, combine, hash_words, to_unit_open

log = logging.getLogger(__name__)

_REDRAW_SHIFT = np.uint64(48)


@dataclass(frozen=True)
class MarkedPoint:
    position: tuple[float, ...]
    mark: float
    coords: tuple[int, int]
    stream_key: int


@dataclass
class Realization:
    """Points of the marked process inside a window, sorted by (m, l)."""

    master_seed: int
    beta: float
    window: Window
    mark_law: MarkLaw
    positions: np.ndarray
    marks: np.ndarray
    cube: np.ndarray
    rank: np.ndarray
    keys: np.ndarray
    origin: int = -1
    redraws: int = 0
    replicas: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def d(self) -> int:
        return self.window.grid.d

    @property
    def has_origin(self) -> bool:
        return self.origin >= 0

    @property
    def ids(self) -> np.ndarray:
        return np.stack([self.cube, self.rank], axis=1)

    def point(self, i: int) -> MarkedPoint:
        k = (int(self.keys[i, 0]) << 64) | int(self.keys[i, 1])
        return MarkedPoint(tuple(float(v) for v in self.positions[i]), float(self.marks[i]),
                           (int(self.cube[i]), int(self.rank[i])), k)

    def points(self) -> list[MarkedPoint]:
        return [self.point(i) for i in range(self.n)]

    def coordinates(self) -> dict[tuple[float, ...], tuple[int, int]]:
        return {tuple(float(v) for v in self.positions[i]): (int(self.cube[i]), int(self.rank[i]))
                for i in range(self.n)}

    def subset(self, keep: np.ndarray, window: Window | None = None) -> "Realization":
        """Keep the masked points; ranks are recomputed, keys travel along."""
        keep = np.asarray(keep, dtype=bool)
        origin = -1
        if self.has_origin and keep[self.origin]:
            origin = int(np.count_nonzero(keep[: self.origin]))
        return _assemble(self.master_seed, self.beta, window or self.window, self.mark_law,
                         self.positions[keep], self.marks[keep], self.cube[keep], self.keys[keep],
                         origin, self.redraws, dict(self.replicas))

    def restrict(self, window: Window) -> "Realization":
        if not window.issubset(self.window):
            raise ValueError("sub-window must be a union of cubes of this window")
        keep = np.isin(self.cube, np.asarray(window.indices, dtype=np.int64))
        return self.subset(keep, window)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "l"] + [f"x{k}" for k in range(self.d)] + ["mark", "origin"])
        for i in range(self.n):
            w.writerow([int(self.cube[i]), int(self.rank[i])] + [repr(float(v)) for v in self.positions[i]]
                       + [repr(float(self.marks[i])), int(i == self.origin)])
        return buf.getvalue()


def _assemble(seed, beta, window, law, pos, marks, cube, keys, origin, redraws, replicas) -> Realization:
    d = window.grid.d
    flag = np.zeros(len(pos), dtype=bool)
    if origin >= 0:
        flag[origin] = True
    cols = tuple(pos[:, k] for k in reversed(range(d)))
    order = np.lexsort(cols + (cube,))
    pos, marks, cube, keys, flag = pos[order], marks[order], cube[order], keys[order], flag[order]
    rank = np.zeros(len(pos), dtype=np.int64)
    if len(pos):
        starts = np.r_[0, np.nonzero(np.diff(cube))[0] + 1]
        counts = np.diff(np.r_[starts, len(pos)])
        rank = np.arange(len(pos)) - np.repeat(starts, counts)
    o = int(np.nonzero(flag)[0][0]) if flag.any() else -1
    return Realization(int(seed), float(beta), window, law, pos, marks, cube.astype(np.int64), rank,
                       keys, o, redraws, replicas)


@lru_cache(maxsize=256)
def _poisson_cdf(mean: float) -> np.ndarray:
    kmax = int(mean + 14.0 * np.sqrt(mean) + 40)
    return poisson.cdf(np.arange(kmax + 1), mean)


def poisson_from_uniform(u: np.ndarray, mean: float) -> np.ndarray:
    """Po(mean) variates by inverse CDF."""
    if mean == 0:
        return np.zeros(np.shape(u), dtype=np.int64)
    return np.searchsorted(_poisson_cdf(float(mean)), u, side="right").astype(np.int64)


def sample(master_seed: int, beta: float, window: Window, mark_law: MarkLaw | None = None,
           with_origin: bool = False, replicas: dict[int, int] | None = None) -> Realization:
    """Sample Phi restricted to ``window`` at intensity ``beta``.

    ``replicas`` maps cube index -> replica number; a non-zero replica gives
    an independent copy of that cube's process and leaves the rest intact.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if len(window) == 0:
        raise ValueError("window is empty")
    law = mark_law or MarkLaw.unit()
    replicas = {int(k): int(v) for k, v in (replicas or {}).items() if v}
    grid = window.grid
    d, t = grid.d, grid.t
    stride = d + 4
    idx = np.asarray(window.indices, dtype=np.int64)
    rep = np.array([replicas.get(int(i), 0) for i in idx], dtype=np.int64)
    ckey = hash_words(np.uint64(int(master_seed) & ((1 << 64) - 1)), TAG_CUBE, idx, rep)
    ckey = np.broadcast_to(ckey, idx.shape)
    counts = poisson_from_uniform(to_unit_open(combine(ckey, 0)), beta * (2.0 * t) ** d)

    total = int(counts.sum())
    pcube = np.repeat(np.arange(len(idx)), counts)
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    local = (np.arange(total) - np.repeat(starts, counts)).astype(np.uint64)
    pkey = ckey[pcube]
    base = np.uint64(1) + local * np.uint64(stride)
    lower = grid.side * window.zs[pcube] - t

    def coords(attempt: np.ndarray, sel: np.ndarray) -> np.ndarray:
        out = np.empty((len(sel), d))
        for k in range(d):
            slot = base[sel] + np.uint64(k) + (attempt[sel] << _REDRAW_SHIFT)
            out[:, k] = to_unit_open(combine(pkey[sel], slot))
        return lower[sel] + grid.side * out

    attempt = np.zeros(total, dtype=np.uint64)
    pos = coords(attempt, np.arange(total))
    redraws = 0
    for _ in range(64):
        bad = np.any(grid.lattice_coords(pos) != window.zs[pcube], axis=1)
        if total > 1:
            # exact duplicates within a cube: redraw the later point
            keyed = np.concatenate([pcube[:, None].astype(np.float64), pos], axis=1)
            _, first = np.unique(keyed, axis=0, return_index=True)
            dup = np.ones(total, dtype=bool)
            dup[first] = False
            bad |= dup
        sel = np.nonzero(bad)[0]
        if len(sel) == 0:
            break
        redraws += len(sel)
        attempt[sel] += np.uint64(1)
        pos[sel] = coords(attempt, sel)
    else:
        raise RuntimeError("could not place points inside their cubes")
    if redraws:
        log.info("redrew %d points (boundary rounding or duplicates)", redraws)

    keys = np.stack([combine(pkey, base + np.uint64(d)), combine(pkey, base + np.uint64(d + 1))], axis=1)
    marks = law.from_uniform(to_unit_open(combine(pkey, base + np.uint64(d + 2))))
    cube = idx[pcube]

    origin = -1
    if with_origin:
        if 0 not in window:
            raise ValueError("the origin cube Q_0 is not in the window")
        okey = hash_words(np.uint64(int(master_seed) & ((1 << 64) - 1)), TAG_ORIGIN, replicas.get(0, 0))
        okeys = np.array([[combine(okey, 1), combine(okey, 2)]], dtype=np.uint64)
        omark = law.from_uniform(to_unit_open(combine(okey, 3)).reshape(1))
        pos = np.concatenate([pos, np.zeros((1, d))])
        marks = np.concatenate([marks, omark])
        cube = np.concatenate([cube, [0]])
        keys = np.concatenate([keys.reshape(-1, 2), okeys])
        origin = total
    return _assemble(master_seed, beta, window, law, pos, marks, cube, keys.reshape(-1, 2), origin,
                     redraws, replicas)


def replace_cube(base: Realization, i: int, replica: int = 1) -> Realization:
    """``base`` with cube i (and the origin's mark when i = 0) drawn from another replica.

    Equal to ``sample(..., replicas={i: replica})`` on the same window but
    cheaper, since the other cubes are reused.
    """
    if i not in base.window:
        raise ValueError(f"cube {i} is not in the window")
    reps = dict(base.replicas)
    reps[int(i)] = int(replica)
    fresh = sample(base.master_seed, base.beta, Window(base.window.grid, (int(i),)), base.mark_law,
                   with_origin=base.has_origin and i == 0, replicas={int(i): int(replica)})
    keep = base.cube != i
    origin = -1
    if base.has_origin and i != 0:
        origin = int(np.count_nonzero(keep[: base.origin]))
    pos = np.concatenate([base.positions[keep], fresh.positions])
    marks = np.concatenate([base.marks[keep], fresh.marks])
    cube = np.concatenate([base.cube[keep], fresh.cube])
    keys = np.concatenate([base.keys[keep], fresh.keys])
    if fresh.has_origin:
        origin = int(keep.sum()) + fresh.origin
    return _assemble(base.master_seed, base.beta, base.window, base.mark_law, pos, marks, cube, keys,
                     origin, base.redraws + fresh.redraws, reps)


def from_points(window: Window, positions, marks=None, mark_law: MarkLaw | None = None,
                with_origin: bool = False, key_seed: int = 0, beta: float = 0.0,
                origin_mark: float = 0.0) -> Realization:
    """Realization with hand-placed points (keys derived from ``key_seed``)."""
    grid = window.grid
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, grid.d)
    n = len(pos)
    if marks is None:
        marks = np.zeros(n)
    marks = np.asarray(marks, dtype=np.float64).reshape(n)
    if not window.contains_points(pos).all():
        raise ValueError("all points must lie in the window")
    cube = np.array([grid.index_of(z) for z in grid.lattice_coords(pos)], dtype=np.int64).reshape(n)
    h = hash_words(np.uint64(key_seed), TAG_CUBE, np.arange(n, dtype=np.uint64))
    keys = np.stack([combine(h, 1), combine(h, 2)], axis=1).reshape(n, 2)
    origin = -1
    if with_origin:
        okey = hash_words(np.uint64(key_seed), TAG_ORIGIN, 0)
        pos = np.concatenate([pos, np.zeros((1, grid.d))])
        marks = np.concatenate([marks, [origin_mark]])
        cube = np.concatenate([cube, [0]])
        keys = np.concatenate([keys, np.array([[combine(okey, 1), combine(okey, 2)]], dtype=np.uint64)])
        origin = n
    return _assemble(key_seed, beta, window, mark_law or MarkLaw.unit(), pos, marks, cube, keys,
                     origin, 0, {})


def coordinates(realization: Realization) -> dict[tuple[float, ...], tuple[int, int]]:
    return realization.coordinates()
