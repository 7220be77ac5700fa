"""Mark laws, connection functions and the composed simplex probability kappa.

A connection family bundles phi_1 .. phi_alpha together with the declared
lower bound (delta, eps, A) and the cutoff D used by the percolation code.
Marks are stored as one float per vertex: 0 for unmarked models, the grain
radius for ball-shaped grains, an arbitrary real for scalar marks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .geometry import batch_diam
from .rng import TAG_TUPLES, derive_seed

EPS_GEOM = 1e-12

MARK_UNIT = "unit"
MARK_RADIUS = "radius"
MARK_SCALAR = "scalar"


@dataclass(frozen=True)
class MarkLaw:
    """Distribution Theta of the marks.

    kind is one of ``unit``, ``fixed_radius``, ``uniform_radius``,
    ``uniform_scalar``.  Radius laws are supported on [lo, hi], so hi is the
    (B2) bound R.
    """

    kind: str = "unit"
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "fixed_radius", "uniform_radius", "uniform_scalar"):
            raise ValueError(f"unknown mark law {self.kind!r}")
        if self.kind == "fixed_radius" and not self.lo >= 0:
            raise ValueError("radius must be >= 0")
        if self.kind in ("uniform_radius", "uniform_scalar") and not self.hi >= self.lo:
            raise ValueError("need lo <= hi")
        if self.kind == "uniform_radius" and self.lo < 0:
            raise ValueError("radii must be >= 0")

    @classmethod
    def unit(cls) -> "MarkLaw":
        return cls("unit")

    @classmethod
    def fixed_radius(cls, r: float) -> "MarkLaw":
        return cls("fixed_radius", r, r)

    @classmethod
    def uniform_radius(cls, lo: float, hi: float) -> "MarkLaw":
        return cls("uniform_radius", lo, hi)

    @classmethod
    def uniform_scalar(cls, lo: float, hi: float) -> "MarkLaw":
        return cls("uniform_scalar", lo, hi)

    @property
    def mark_kind(self) -> str:
        if self.kind == "unit":
            return MARK_UNIT
        if self.kind == "uniform_scalar":
            return MARK_SCALAR
        return MARK_RADIUS

    @property
    def radius_bound(self) -> float | None:
        """R with Theta(radius <= R) = 1, for radius laws."""
        return self.hi if self.mark_kind == MARK_RADIUS else None

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on [0, 1) to marks (inverse CDF)."""
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "unit":
            return np.zeros_like(u)
        if self.kind == "fixed_radius":
            return np.full_like(u, self.lo)
        return self.lo + (self.hi - self.lo) * u

    def mass(self, A: tuple[float, float] | None) -> float:
        """Theta(A) for an interval A = [a, b] (None = whole space)."""
        if A is None or self.kind == "unit":
            return 1.0
        a, b = A
        if self.kind == "fixed_radius":
            return 1.0 if a <= self.lo <= b else 0.0
        if self.hi == self.lo:
            return 1.0 if a <= self.lo <= b else 0.0
        lo, hi = max(a, self.lo), min(b, self.hi)
        return max(0.0, hi - lo) / (self.hi - self.lo)

    def from_uniform_in(self, u: np.ndarray, A: tuple[float, float] | None) -> np.ndarray:
        """Marks drawn from Theta conditioned on A."""
        if A is None or self.kind in ("unit", "fixed_radius"):
            return self.from_uniform(u)
        lo, hi = max(A[0], self.lo), min(A[1], self.hi)
        return lo + (hi - lo) * np.asarray(u, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "MarkLaw":
        return cls(d.get("kind", "unit"), float(d.get("lo", 0.0)), float(d.get("hi", 0.0)))


@dataclass(frozen=True)
class Profile:
    """Non-increasing profile [0, inf) -> [0, 1] applied to a simplex diameter."""

    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "step", "exp", "linear"):
            raise ValueError(f"unknown profile {self.kind!r}")
        if self.kind in ("const", "step") and not 0.0 <= self.a <= 1.0:
            raise ValueError("profile level must lie in [0, 1]")
        if self.kind in ("exp", "linear") and not self.a > 0:
            raise ValueError("profile scale must be > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "const":
            return np.full_like(x, self.a)
        if self.kind == "step":
            return np.where(x <= self.b, self.a, 0.0)
        if self.kind == "exp":
            return np.exp(-x / self.a)
        return np.clip(1.0 - x / self.a, 0.0, 1.0)

    def spec(self) -> str:
        if self.kind == "step":
            return f"step:{self.a!r}:{self.b!r}"
        return f"{self.kind}:{self.a!r}"

    @classmethod
    def parse(cls, text: str) -> "Profile":
        parts = str(text).split(":")
        kind = parts[0]
        vals = [float(p) for p in parts[1:]]
        if kind == "step":
            return cls(kind, vals[0], vals[1])
        return cls(kind, vals[0] if vals else 0.0)


# -- intersection primitives -------------------------------------------------


def _circumball(pts: list[np.ndarray]) -> tuple[np.ndarray, float] | None:
    p0 = pts[0]
    if len(pts) == 1:
        return p0.copy(), 0.0
    A = np.array([p - p0 for p in pts[1:]])
    G = A @ A.T
    rhs = 0.5 * (A * A).sum(1)
    try:
        lam = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        return None
    c = p0 + A.T @ lam
    return c, float(np.linalg.norm(c - p0))


def _welzl(P: list[np.ndarray], R: list[np.ndarray], d: int) -> tuple[np.ndarray, float]:
    if not P or len(R) == d + 1:
        if not R:
            return np.zeros(d), -1.0
        ball = _circumball(R)
        if ball is None:
            # affinely dependent support: the farthest pair spans the ball
            best = None
            for a, b in combinations(R, 2):
                c = 0.5 * (a + b)
                rad = 0.5 * float(np.linalg.norm(a - b))
                if all(np.linalg.norm(p - c) <= rad + EPS_GEOM for p in R):
                    if best is None or rad < best[1]:
                        best = (c, rad)
            ball = best if best is not None else (R[0], 0.0)
        return ball
    p = P[-1]
    c, rad = _welzl(P[:-1], R, d)
    if rad >= 0 and np.linalg.norm(p - c) <= rad + EPS_GEOM:
        return c, rad
    return _welzl(P[:-1], R + [p], d)


def min_enclosing_ball(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball containing the points (Welzl recursion)."""
    pts = [np.asarray(p, dtype=np.float64) for p in np.asarray(points, dtype=np.float64)]
    return _welzl(pts, [], len(pts[0]))


def balls_intersect(centres: np.ndarray, radii: np.ndarray) -> bool:
    """Whether the closed balls B(centres[i], radii[i]) share a point.

    Minimises max_i ||c - x_i||^2 - r_i^2 over c; the minimiser lies in the
    affine hull of its active set, so enumerating candidate active sets of
    size <= d + 1 and their power-equidistant points finds the minimum.
    """
    X = np.asarray(centres, dtype=np.float64)
    w = np.asarray(radii, dtype=np.float64) ** 2
    k, d = X.shape
    best = math.inf
    for size in range(1, min(k, d + 1) + 1):
        for S in combinations(range(k), size):
            x0 = X[S[0]]
            if size == 1:
                c = x0
            else:
                A = X[list(S[1:])] - x0
                rhs = 0.5 * ((A * A).sum(1) - w[list(S[1:])] + w[S[0]])
                try:
                    lam = np.linalg.solve(A @ A.T, rhs)
                except np.linalg.LinAlgError:
                    continue
                c = x0 + A.T @ lam
            g = float((((X - c) ** 2).sum(1) - w).max())
            best = min(best, g)
    return best <= EPS_GEOM * max(1.0, float(w.max()))


# -- families ------------------------------------------------------------------

PhiFn = Callable[[int, np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class V1Params:
    delta: float
    eps: float
    A: tuple[float, float] | None = None


@dataclass(frozen=True)
class ConnectionFamily:
    """phi_1..phi_alpha plus declared (V1)/(V2) data.

    kind: ``vr`` (Vietoris-Rips, ball radius ``r``), ``cech`` (radius ``r``),
    ``boolean`` (ball grains from ``mark_law``), ``diam_kernel`` (diameter
    profiles) or ``custom`` (Python callable, not serialisable).
    """

    kind: str
    alpha: int
    D: float
    r: float = 0.0
    mark_law: MarkLaw = field(default_factory=MarkLaw.unit)
    profiles: tuple[Profile, ...] = ()
    cutoff_dim: int = 0
    delta: float | None = None
    eps: float | None = None
    A: tuple[float, float] | None = None
    custom_phi: PhiFn | None = field(default=None, compare=False)
    hard_cutoff: bool = True

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if not self.D > 0:
            raise ValueError("the cutoff D must be > 0")
        if self.kind not in ("vr", "cech", "boolean", "diam_kernel", "custom"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "diam_kernel" and len(self.profiles) != self.alpha:
            raise ValueError("diam_kernel needs one profile per dimension 1..alpha")
        if self.kind == "custom" and self.custom_phi is None:
            raise ValueError("custom family needs a phi callable")
        if self.kind == "boolean" and self.mark_law.mark_kind != MARK_RADIUS:
            raise ValueError("boolean grains need a radius mark law")

    # -- evaluation -----------------------------------------------------------

    def _check_dim(self, j: int):
        if not 1 <= j <= self.alpha:
            raise ValueError(f"dimension {j} outside 1..{self.alpha}")

    def phi_batch(self, j: int, pos: np.ndarray, marks: np.ndarray) -> np.ndarray:
        """phi_j for k tuples: pos (k, j+1, d), marks (k, j+1)."""
        self._check_dim(j)
        pos = np.asarray(pos, dtype=np.float64)
        marks = np.asarray(marks, dtype=np.float64)
        k = pos.shape[0]
        if k == 0:
            return np.zeros(0)
        if pos.shape[1] != j + 1:
            raise ValueError("vertex count must equal j + 1")
        if self.kind == "vr":
            if j == 1:
                return (np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1) <= 2.0 * self.r).astype(np.float64)
            return (batch_diam(pos) <= 2.0 * self.r).astype(np.float64)
        if self.kind == "cech":
            if j == 1:
                return (np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1) <= 2.0 * self.r).astype(np.float64)
            out = np.empty(k)
            for i in range(k):
                _, rad = min_enclosing_ball(pos[i])
                out[i] = 1.0 if rad <= self.r + EPS_GEOM else 0.0
            return out
        if self.kind == "boolean":
            if j == 1:
                dist = np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1)
                return (dist <= marks[:, 0] + marks[:, 1]).astype(np.float64)
            return np.array([1.0 if balls_intersect(pos[i], marks[i]) else 0.0 for i in range(k)])
        if self.kind == "diam_kernel":
            dm = batch_diam(pos)
            val = self.profiles[j - 1](dm)
            if j == (self.cutoff_dim or self.alpha):
                val = np.where(dm <= self.D, val, 0.0)
            return val
        out = np.array([float(self.custom_phi(j, pos[i], marks[i])) for i in range(k)])
        if np.any((out < 0) | (out > 1)):
            raise ValueError("custom phi left [0, 1]")
        return out

    def phi(self, j: int, pos, marks=None) -> float:
        pos = np.asarray(pos, dtype=np.float64)
        if marks is None:
            marks = np.zeros(len(pos))
        return float(self.phi_batch(j, pos[None], np.asarray(marks, dtype=np.float64)[None])[0])

    @property
    def is_indicator(self) -> bool:
        """All phi_j take values in {0, 1}."""
        if self.kind in ("vr", "cech", "boolean"):
            return True
        if self.kind == "diam_kernel":
            return all(p.kind in ("const", "step") and p.a in (0.0, 1.0) for p in self.profiles)
        return False

    # -- declared bounds ---------------------------------------------------------

    def v1(self, q: int) -> V1Params:
        """(delta, eps, A) of the lower bound for kappa_{q+1}."""
        if not 0 <= q < self.alpha:
            raise ValueError(f"q must lie in 0..{self.alpha - 1}")
        if self.kind == "vr":
            return V1Params(self.delta if self.delta is not None else 2.0 * self.r, 1.0)
        if self.kind == "cech":
            return V1Params(self.delta if self.delta is not None else self.r, 1.0)
        if self.kind == "boolean":
            law = self.mark_law
            r0 = self.delta if self.delta is not None else (law.lo if law.lo > 0 else 0.5 * law.hi)
            return V1Params(r0, 1.0, (r0, math.inf))
        if self.kind == "diam_kernel":
            delta = self.delta if self.delta is not None else self._default_delta(q)
            eps = 1.0
            m = q + 2
            for size in range(2, m + 1):
                eps *= float(self.profiles[size - 2](delta)) ** math.comb(m, size)
            if self.eps is not None:
                eps = min(eps, self.eps)
            return V1Params(delta, eps, self.A)
        return V1Params(self.delta or 0.0, self.eps or 0.0, self.A)

    def _default_delta(self, q: int) -> float:
        # largest b <= D on a coarse grid with every profile positive
        for frac in np.linspace(1.0, 0.01, 100):
            b = frac * self.D
            if all(float(self.profiles[j](b)) > 0 for j in range(q + 1)):
                return float(b)
        return 0.0

    def v2(self, q: int) -> float:
        return self.D

    @property
    def needs_edge_cutoff(self) -> bool:
        """True when phi_1 itself can be positive beyond D (the builder then
        multiplies phi_1 by 1{|x - y| <= D})."""
        if self.kind == "vr":
            return 2.0 * self.r > self.D
        if self.kind == "cech":
            return 2.0 * self.r > self.D
        if self.kind == "boolean":
            return 2.0 * self.mark_law.hi > self.D
        if self.kind == "diam_kernel":
            return (self.cutoff_dim or self.alpha) != 1
        return not self.hard_cutoff

    # -- serialisation -----------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom families cannot be serialised")
        out = {"kind": self.kind, "alpha": self.alpha, "D": self.D}
        if self.kind in ("vr", "cech"):
            out["r"] = self.r
        if self.kind == "boolean":
            out["marks"] = self.mark_law.to_dict()
        if self.kind == "diam_kernel":
            out["profiles"] = [p.spec() for p in self.profiles]
            out["cutoff_dim"] = self.cutoff_dim or self.alpha
        if self.delta is not None:
            out["delta"] = self.delta
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ConnectionFamily":
        kind = d["kind"]
        alpha = int(d.get("alpha", 1))
        delta = d.get("delta")
        delta = None if delta is None else float(delta)
        if kind == "vr":
            return vietoris_rips(float(d["r"]), alpha, d.get("D"), delta=delta)
        if kind == "cech":
            return cech(float(d["r"]), alpha, d.get("D"), delta=delta)
        if kind == "boolean":
            return boolean_balls(MarkLaw.from_dict(d["marks"]), alpha, d.get("D"), delta=delta)
        if kind == "diam_kernel":
            profiles = [Profile.parse(p) for p in d["profiles"]]
            return diam_kernel(profiles, float(d["D"]), cutoff_dim=int(d.get("cutoff_dim", len(profiles))), delta=delta)
        raise ValueError(f"cannot build family of kind {kind!r} from a config")


def vietoris_rips(r: float, alpha: int = 1, D: float | None = None, delta: float | None = None) -> ConnectionFamily:
    """phi_j = 1{diam <= 2r}; the cutoff defaults to 2r."""
    if not r > 0:
        raise ValueError("r must be > 0")
    return ConnectionFamily("vr", alpha, float(D) if D is not None else 2.0 * r, r=r, delta=delta)


def cech(r: float, alpha: int = 1, D: float | None = None, delta: float | None = None) -> ConnectionFamily:
    """phi_j = 1{balls of radius r around the vertices share a point}."""
    if not r > 0:
        raise ValueError("r must be > 0")
    return ConnectionFamily("cech", alpha, float(D) if D is not None else 2.0 * r, r=r, delta=delta)


def boolean_balls(mark_law: MarkLaw, alpha: int = 1, D: float | None = None, delta: float | None = None) -> ConnectionFamily:
    """Ball grains x + B(0, rho); D defaults to 2R with R the radius bound."""
    R = mark_law.radius_bound
    if R is None:
        raise ValueError("boolean grains need a radius mark law")
    if D is None:
        D = 2.0 * R
    return ConnectionFamily("boolean", alpha, float(D), mark_law=mark_law, delta=delta)


def diam_kernel(profiles: Sequence[Profile], D: float, cutoff_dim: int | None = None,
                delta: float | None = None) -> ConnectionFamily:
    """phi_j = profile_j(diam), with 1{diam <= D} on phi_{cutoff_dim}."""
    profiles = tuple(p if isinstance(p, Profile) else Profile.parse(p) for p in profiles)
    alpha = len(profiles)
    return ConnectionFamily("diam_kernel", alpha, float(D), profiles=profiles,
                            cutoff_dim=cutoff_dim or alpha, delta=delta)


def custom(phi: PhiFn, alpha: int, D: float, delta: float = 0.0, eps: float = 0.0,
           A: tuple[float, float] | None = None, mark_law: MarkLaw | None = None,
           hard_cutoff: bool = False) -> ConnectionFamily:
    """Family from a callable phi(j, positions, marks) -> [0, 1]."""
    return ConnectionFamily("custom", alpha, float(D), mark_law=mark_law or MarkLaw.unit(),
                            delta=delta, eps=eps, A=A, custom_phi=phi, hard_cutoff=hard_cutoff)


def phi(family: ConnectionFamily, j: int, pos, marks=None) -> float:
    return family.phi(j, pos, marks)


def kappa_batch(family: ConnectionFamily, j: int, pos: np.ndarray, marks: np.ndarray) -> np.ndarray:
    """Product of phi_{|I|-1}(x_I) over all I of size >= 2 (phi_0 = 1)."""
    family._check_dim(j)
    pos = np.asarray(pos, dtype=np.float64)
    marks = np.asarray(marks, dtype=np.float64)
    out = np.ones(pos.shape[0])
    for size in range(2, j + 2):
        for I in combinations(range(j + 1), size):
            I = list(I)
            out *= family.phi_batch(size - 1, pos[:, I], marks[:, I])
    return out


def kappa(family: ConnectionFamily, j: int, pos, marks=None) -> float:
    pos = np.asarray(pos, dtype=np.float64)
    if marks is None:
        marks = np.zeros(len(pos))
    return float(kappa_batch(family, j, pos[None], np.asarray(marks, dtype=np.float64)[None])[0])


# -- bound verification --------------------------------------------------------


@dataclass
class BoundReport:
    v1_ok: bool
    v2_ok: bool
    n_v1: int
    n_v2: int
    counterexamples: list[dict]


def _scaled_tuples(rng: np.random.Generator, n: int, m: int, d: int, target: np.ndarray) -> np.ndarray:
    centre = rng.uniform(-10.0, 10.0, size=(n, 1, d))
    raw = rng.normal(size=(n, m, d))
    dm = batch_diam(raw)
    dm[dm == 0] = 1.0
    return centre + raw * (target / dm)[:, None, None]


def verify_v1_v2(family: ConnectionFamily, q: int, sample_budget: int, d: int = 2,
                 seed: int = 0, max_examples: int = 5) -> BoundReport:
    """Probe eps 1{diam <= delta, marks in A} <= kappa_{q+1} <= 1{diam <= D}.

    Half the budget goes to tuples with diameter <= delta and marks in A,
    half to tuples with diameter in (D, 3D].
    """
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, TAG_TUPLES, q))
    m = q + 2
    p1 = family.v1(q)
    D = family.v2(q)
    law = family.mark_law
    examples: list[dict] = []

    n1 = max(1, sample_budget // 2)
    n2 = max(1, sample_budget - n1)

    v1_ok = p1.eps > 0 and p1.delta > 0 and law.mass(p1.A) > 0
    if v1_ok:
        w = rng.uniform(0.0, 1.0, n1)
        w[: n1 // 4] = 1.0  # a quarter sits on the boundary diam = delta
        target = p1.delta * w * (1.0 - 1e-9)
        pos = _scaled_tuples(rng, n1, m, d, target)
        marks = law.from_uniform_in(rng.random((n1, m)), p1.A)
        kap = kappa_batch(family, q + 1, pos, marks)
        bad = np.nonzero(kap < p1.eps)[0]
        if len(bad):
            v1_ok = False
            for i in bad[:max_examples]:
                examples.append({"bound": "V1", "positions": pos[i].tolist(), "marks": marks[i].tolist(),
                                 "kappa": float(kap[i]), "required": p1.eps})
    else:
        examples.append({"bound": "V1", "reason": "declared eps, delta or Theta(A) is not positive"})

    w = rng.uniform(0.0, 1.0, n2)
    target = D * (1.0 + 1e-9 + 2.0 * w)
    pos = _scaled_tuples(rng, n2, m, d, target)
    marks = law.from_uniform(rng.random((n2, m)))
    kap = kappa_batch(family, q + 1, pos, marks)
    bad = np.nonzero(kap > 0)[0]
    v2_ok = len(bad) == 0
    for i in bad[:max_examples]:
        examples.append({"bound": "V2", "positions": pos[i].tolist(), "marks": marks[i].tolist(),
                         "kappa": float(kap[i]), "diam": float(batch_diam(pos[i:i + 1])[0])})
    return BoundReport(v1_ok, v2_ok, n1, n2, examples)
