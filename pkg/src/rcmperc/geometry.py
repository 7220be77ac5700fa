"""Cube partition of R^d, windows made of whole cubes, and small metric helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np


@lru_cache(maxsize=None)
def _shell_start(k: int, d: int) -> int:
    return 0 if k == 0 else (2 * k - 1) ** d


def _completions(k: int, n_rem: int, has_k: bool) -> int:
    full = (2 * k + 1) ** n_rem
    if has_k:
        return full
    return full - (2 * k - 1) ** n_rem if k > 0 else full


@dataclass(frozen=True)
class CubeGrid:
    """Half-open cubes Q_i = [-t, t)^d + 2t z_i.

    The enumeration sorts Z^d by sup-norm shell, ties broken
    lexicographically, so z_0 is the origin.
    """

    d: int
    t: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.t > 0:
            raise ValueError("t must be > 0")

    @property
    def side(self) -> float:
        return 2.0 * self.t

    def index_of(self, z: Sequence[int]) -> int:
        z = tuple(int(v) for v in z)
        if len(z) != self.d:
            raise ValueError("lattice point has wrong dimension")
        k = max(abs(v) for v in z)
        if k == 0:
            return 0
        rank = 0
        has_k = False
        for p, zp in enumerate(z):
            n_rem = self.d - p - 1
            n_smaller = zp + k
            if n_smaller > 0:
                # v = -k is the only smaller value with |v| = k
                rank += _completions(k, n_rem, True)
                rank += (n_smaller - 1) * _completions(k, n_rem, has_k)
            has_k = has_k or abs(zp) == k
        return _shell_start(k, self.d) + rank

    def z_of(self, i: int) -> tuple[int, ...]:
        i = int(i)
        if i < 0:
            raise ValueError("cube index must be >= 0")
        if i == 0:
            return (0,) * self.d
        k = max(1, int(round(i ** (1.0 / self.d) / 2)))
        while _shell_start(k, self.d) > i:
            k -= 1
        while (2 * k + 1) ** self.d <= i:
            k += 1
        rank = i - _shell_start(k, self.d)
        z: list[int] = []
        has_k = False
        for p in range(self.d):
            n_rem = self.d - p - 1
            for v in range(-k, k + 1):
                hk = has_k or abs(v) == k
                c = _completions(k, n_rem, hk)
                if rank < c:
                    z.append(v)
                    has_k = hk
                    break
                rank -= c
        return tuple(z)

    def lattice_coords(self, x: np.ndarray) -> np.ndarray:
        """z with x in Q_z, for an (n, d) array (lower faces inclusive)."""
        x = np.asarray(x, dtype=np.float64)
        return np.floor((x + self.t) / self.side).astype(np.int64)

    def cube_index(self, x: Sequence[float]) -> int:
        x = np.asarray(x, dtype=np.float64).reshape(1, self.d)
        if not np.all(np.isfinite(x)):
            raise ValueError("point must be finite")
        return self.index_of(self.lattice_coords(x)[0])

    def bounds(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Lower (inclusive) and upper (exclusive) corners of Q_i."""
        z = np.asarray(self.z_of(i), dtype=np.float64)
        centre = self.side * z
        return centre - self.t, centre + self.t

    def centre(self, i: int) -> np.ndarray:
        return self.side * np.asarray(self.z_of(i), dtype=np.float64)


def cube_index(x: Sequence[float], grid: CubeGrid) -> int:
    return grid.cube_index(x)


@dataclass(frozen=True)
class Window:
    """A finite union of grid cubes."""

    grid: CubeGrid
    indices: tuple[int, ...]
    _zs: np.ndarray = field(init=False, repr=False, compare=False)
    _set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        object.__setattr__(self, "indices", idx)
        zs = np.array([self.grid.z_of(i) for i in idx], dtype=np.int64).reshape(len(idx), self.grid.d)
        object.__setattr__(self, "_zs", zs)
        object.__setattr__(self, "_set", frozenset(idx))

    @classmethod
    def from_indices(cls, grid: CubeGrid, indices: Iterable[int]) -> "Window":
        return cls(grid, tuple(indices))

    @property
    def zs(self) -> np.ndarray:
        return self._zs

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in self._set

    @property
    def index_set(self) -> frozenset[int]:
        return self._set

    def issubset(self, other: "Window") -> bool:
        return self.grid == other.grid and self.index_set <= other.index_set

    def contains_points(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of points lying in the window."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.grid.d)
        if len(self) == 0 or len(x) == 0:
            return np.zeros(len(x), dtype=bool)
        z = self.grid.lattice_coords(x)
        key = {tuple(row): True for row in self._zs.tolist()}
        return np.array([tuple(row) in key for row in z.tolist()], dtype=bool)

    def lower_corners(self) -> np.ndarray:
        return self.grid.side * self._zs - self.grid.t


def diam(points: np.ndarray) -> float:
    """Largest pairwise Euclidean distance; 0 for a single point."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(1, -1)
    if len(p) == 0:
        raise ValueError("diameter of an empty set is undefined")
    if len(p) == 1:
        return 0.0
    diff = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def batch_diam(points: np.ndarray) -> np.ndarray:
    """Diameters of a batch of tuples shaped (k, m, d)."""
    p = np.asarray(points, dtype=np.float64)
    if p.shape[1] < 2:
        return np.zeros(p.shape[0])
    diff = p[:, :, None, :] - p[:, None, :, :]
    return np.sqrt((diff**2).sum(-1)).reshape(p.shape[0], -1).max(axis=1)


def point_box_distance(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Euclidean distance from points (n, d) to the closed box [lo, hi]."""
    x = np.asarray(x, dtype=np.float64)
    gap = np.maximum(np.maximum(lo - x, 0.0), x - hi)
    return np.sqrt((gap**2).sum(-1))


def box_norm_range(lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
    """(min, max) of ||x|| over the closed box [lo, hi]."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    near = np.clip(0.0, lo, hi)
    far = np.where(np.abs(lo) > np.abs(hi), lo, hi)
    return float(np.linalg.norm(near)), float(np.linalg.norm(far))


def box_sphere_distance(lo, hi, s: float) -> float:
    """Distance between the closed box [lo, hi] and the sphere of radius s."""
    nmin, nmax = box_norm_range(lo, hi)
    return max(0.0, nmin - s, s - nmax)


def window_for_radius(r: float, grid: CubeGrid, D: float | None = None) -> Window:
    """All cubes meeting the closed ball B(0, r + D)."""
    if D is None:
        D = grid.t
    if not r > 0:
        raise ValueError("r must be > 0")
    if grid.t != D:
        raise ValueError("window_for_radius needs a grid with t = D")
    R = r + D
    kmax = int(math.ceil(R / grid.side)) + 1
    rng = range(-kmax, kmax + 1)
    keep = []
    for z in product(rng, repeat=grid.d):
        zc = np.asarray(z, dtype=np.float64) * grid.side
        nmin, _ = box_norm_range(zc - grid.t, zc + grid.t)
        if nmin <= R:
            keep.append(grid.index_of(z))
    return Window(grid, tuple(keep))
