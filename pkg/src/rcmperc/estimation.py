"""Monte Carlo estimates of theta_r(beta), the critical intensity, subcritical
decay and the near-critical linear lower bound.

Every realization is drawn on W^(r_max) and reduced to the reach of the
origin's q-cluster; B_r then holds exactly when reach > r, so all radii of a
sweep share realizations and are coupled sample by sample.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .complex import build
from .connection import ConnectionFamily
from .geometry import CubeGrid, window_for_radius
from .graphs import cluster_reach
from .parallel import run_indexed
from .rng import TAG_BOOTSTRAP, TAG_REPLICATE, derive_seed
from .sampler import sample
from .stats import BOOTSTRAP_RESAMPLES, Estimate, percentile_ci, wilson

SWEEP_COLUMNS = ("beta", "r", "q", "n", "theta_hat", "ci_lo", "ci_hi")


class NoCrossingError(ValueError):
    """The estimator found no crossing inside the bracket."""


def cell_seed(master_seed: int, beta_index: int, rep: int) -> int:
    return derive_seed(master_seed, TAG_REPLICATE, beta_index, rep)


def reach_samples(family: ConnectionFamily, q: int, beta: float, r_max: float, n: int, master_seed: int,
                  beta_index: int = 0, threads: int = 1, d: int = 2) -> np.ndarray:
    """Reach of the origin's q-cluster on W^(r_max) for n independent realizations."""
    if not 0 <= q < family.alpha:
        raise ValueError(f"q must lie in 0..{family.alpha - 1}")
    W = window_for_radius(r_max, CubeGrid(d, family.D), family.D)

    def one(k: int) -> float:
        real = sample(cell_seed(master_seed, beta_index, k), beta, W, family.mark_law, with_origin=True)
        return cluster_reach(build(real, family, alpha=q + 1), q)

    return np.array(run_indexed(one, range(n), threads), dtype=np.float64)


@dataclass
class SweepResult:
    family: ConnectionFamily
    q: int
    betas: list[float]
    rs: list[float]
    n: int
    master_seed: int
    reach: np.ndarray
    d: int = 2

    def hits(self, b: int, r: float) -> np.ndarray:
        return self.reach[b] > r

    def theta(self, b: int, r: float) -> Estimate:
        h = self.hits(b, r)
        return wilson(int(h.sum()), len(h))

    def cells(self) -> list[tuple[float, float, Estimate]]:
        return [(beta, r, self.theta(b, r)) for b, beta in enumerate(self.betas) for r in self.rs]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for beta, r, e in self.cells():
            w.writerow([repr(float(beta)), repr(float(r)), self.q, e.n, repr(e.value), repr(e.lo), repr(e.hi)])
        return buf.getvalue()

    def summary(self) -> dict:
        fam = self.family.to_dict() if self.family.kind != "custom" else {"kind": "custom"}
        return {
            "family": fam, "q": self.q, "d": self.d, "n": self.n, "master_seed": self.master_seed,
            "seed_rule": "derive_seed(master_seed, replicate tag, beta index, replication index)",
            "betas": [float(b) for b in self.betas], "rs": [float(r) for r in self.rs],
            "theta_hat": [[self.theta(b, r).value for r in self.rs] for b in range(len(self.betas))],
        }


def theta_sweep(family: ConnectionFamily, q: int, betas, r, n: int, master_seed: int,
                threads: int = 1, d: int = 2) -> SweepResult:
    """theta_r(beta) for every beta and every radius in ``r`` (shared realizations)."""
    rs = sorted(float(x) for x in np.atleast_1d(r))
    if not rs or rs[0] <= 0:
        raise ValueError("radii must be > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    betas = [float(b) for b in np.atleast_1d(betas)]
    reach = np.stack([reach_samples(family, q, beta, rs[-1], n, master_seed, b, threads, d)
                      for b, beta in enumerate(betas)]) if betas else np.zeros((0, n))
    return SweepResult(family, q, betas, rs, n, master_seed, reach, d)


# -- critical intensity ------------------------------------------------------------


def _first_upcrossing(x: np.ndarray, y: np.ndarray, level: float = 0.0) -> float:
    """Smallest x where the piecewise-linear y first reaches ``level`` from below,
    located by bisection on the interpolant."""
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    for k in range(len(x) - 1):
        if y[k] < level <= y[k + 1]:
            lo, hi = float(x[k]), float(x[k + 1])
            f = lambda t: float(np.interp(t, x, y)) - level  # noqa: E731
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if f(mid) >= 0:
                    hi = mid
                else:
                    lo = mid
            return hi
    raise NoCrossingError("no crossing in bracket")


def _ratio(h_num: np.ndarray, h_den: np.ndarray) -> np.ndarray:
    num = h_num.mean(axis=-1)
    den = h_den.mean(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def crossing_statistic(reach: np.ndarray, r_small: float, r_large: float) -> np.ndarray:
    """g_{r_large} - g_{r_small} per beta, with g_r = theta_r / theta_{r/2}.

    g_r tends to 0 below the critical point and to 1 above it, and stays
    near a constant at criticality, so the curves for two radii cross there.
    """
    g_large = _ratio(reach > r_large, reach > r_large / 2)
    g_small = _ratio(reach > r_small, reach > r_small / 2)
    return g_large - g_small


@dataclass
class CriticalEstimate:
    beta_c_hat: float
    method: str
    ci: tuple[float, float]
    r_small: float
    r_large: float
    failed_resamples: int = 0

    def overlaps(self, other: "CriticalEstimate") -> bool:
        return self.ci[0] <= other.ci[1] and other.ci[0] <= self.ci[1]

    def to_dict(self) -> dict:
        return {"beta_c_hat": self.beta_c_hat, "method": self.method, "ci": list(self.ci),
                "r_small": self.r_small, "r_large": self.r_large, "failed_resamples": self.failed_resamples}


@dataclass
class BetaCResult:
    crossing: CriticalEstimate | None
    bisection: CriticalEstimate | None
    sweep: SweepResult
    tau: float
    errors: dict = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return self.crossing is not None and self.bisection is not None and self.crossing.overlaps(self.bisection)

    def summary(self) -> dict:
        return {"crossing": self.crossing.to_dict() if self.crossing else None,
                "bisection": self.bisection.to_dict() if self.bisection else None,
                "tau": self.tau, "agree": self.agree, "errors": self.errors,
                "betas": self.sweep.betas, "n": self.sweep.n}


def _bootstrap(reach: np.ndarray, stat, master_seed: int, salt: int) -> tuple[tuple[float, float], int]:
    rng = np.random.default_rng(derive_seed(master_seed, TAG_BOOTSTRAP, salt))
    nb, n = reach.shape
    vals = np.full(BOOTSTRAP_RESAMPLES, np.nan)
    for b in range(BOOTSTRAP_RESAMPLES):
        idx = rng.integers(0, n, size=(nb, n))
        try:
            vals[b] = stat(np.take_along_axis(reach, idx, axis=1))
        except NoCrossingError:
            pass
    return percentile_ci(vals), int(np.isnan(vals).sum())


def beta_c_from_sweep(sweep: SweepResult, r_small: float, r_large: float, tau: float = 0.05) -> BetaCResult:
    betas = np.asarray(sweep.betas)
    reach = sweep.reach

    def by_crossing(rc: np.ndarray) -> float:
        return _first_upcrossing(betas, crossing_statistic(rc, r_small, r_large))

    def by_bisection(rc: np.ndarray) -> float:
        return _first_upcrossing(betas, (rc > r_large).mean(axis=1), tau)

    out = BetaCResult(None, None, sweep, tau)
    for name, fn, salt in (("crossing", by_crossing, 1), ("bisection", by_bisection, 2)):
        try:
            val = fn(reach)
        except NoCrossingError as exc:
            out.errors[name] = str(exc)
            continue
        ci, failed = _bootstrap(reach, fn, sweep.master_seed, salt)
        setattr(out, name, CriticalEstimate(val, name, ci, r_small, r_large, failed))
    return out


def estimate_beta_c(family: ConnectionFamily, q: int, r_small: float, r_large: float,
                    beta_bracket: tuple[float, float], n: int, master_seed: int, n_beta: int = 13,
                    tau: float = 0.05, threads: int = 1, d: int = 2) -> BetaCResult:
    """Curve-crossing and threshold-bisection estimates of beta_c^(q) on a shared beta grid.

    Raises NoCrossingError when neither method finds a crossing.
    """
    if not 0 < r_small < r_large:
        raise ValueError("need 0 < r_small < r_large")
    lo, hi = beta_bracket
    if not 0 <= lo < hi:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    betas = np.linspace(lo, hi, n_beta)
    radii = sorted({r_small / 2, r_small, r_large / 2, r_large})
    sweep = theta_sweep(family, q, betas, radii, n, master_seed, threads, d)
    res = beta_c_from_sweep(sweep, r_small, r_large, tau)
    if res.crossing is None and res.bisection is None:
        raise NoCrossingError("no crossing in bracket: theta stays flat (no percolation at any beta tried)")
    return res


# -- decay and near-critical bound ---------------------------------------------------


@dataclass
class DecayFit:
    beta: float
    rs: list[float]
    theta: list[Estimate]
    used: list[float]
    excluded: list[float]
    slope: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan
    degenerate: bool = False

    @property
    def c(self) -> float:
        return -self.slope

    @property
    def exponential(self) -> bool:
        return (not self.degenerate) and self.slope < 0 and self.r2 >= 0.95

    def summary(self) -> dict:
        return {"beta": self.beta, "slope": self.slope, "c": self.c, "intercept": self.intercept,
                "r2": self.r2, "degenerate": self.degenerate, "exponential": self.exponential,
                "excluded_r": self.excluded,
                "points": [{"r": r, "theta_hat": e.value, "ci_lo": e.lo, "ci_hi": e.hi, "n": e.n}
                           for r, e in zip(self.rs, self.theta)]}


def fit_log_linear(rs, thetas: list[Estimate], beta: float = math.nan) -> DecayFit:
    """Weighted least squares of log theta on r; weights n theta / (1 - theta)."""
    rs = [float(r) for r in rs]
    used = [(r, e) for r, e in zip(rs, thetas) if e.value > 0]
    fit = DecayFit(beta, rs, list(thetas), [r for r, _ in used], [r for r, e in zip(rs, thetas) if e.value <= 0])
    if len(used) < 2:
        fit.degenerate = True
        return fit
    x = np.array([r for r, _ in used])
    y = np.log([e.value for _, e in used])
    w = np.array([e.n * e.value / max(1.0 - e.value, 1.0 / e.n) for _, e in used])
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    sxx = float((w * (x - xm) ** 2).sum())
    slope = float((w * (x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_tot = float((w * (y - ym) ** 2).sum())
    fit.slope, fit.intercept = slope, intercept
    fit.r2 = 1.0 - float((w * resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return fit


def decay_fit(family: ConnectionFamily, q: int, beta: float, r_grid, n: int, master_seed: int,
              threads: int = 1, d: int = 2) -> DecayFit:
    rs = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("r_grid must be increasing")
    if rs[0] < family.D:
        raise ValueError("radii must be >= D")
    sweep = theta_sweep(family, q, [beta], rs, n, master_seed, threads, d)
    return fit_log_linear(rs, [sweep.theta(0, r) for r in rs], beta)


@dataclass
class NearCriticalResult:
    beta_c: float
    betas: list[float]
    theta: list[Estimate]
    c_hat: float
    c_ls: float
    verdict: bool
    r_proxy: float

    def summary(self) -> dict:
        return {"beta_c": self.beta_c, "c_hat": self.c_hat, "c_least_squares": self.c_ls,
                "verdict": self.verdict, "r_proxy": self.r_proxy,
                "points": [{"beta": b, "theta_hat": e.value, "ci_lo": e.lo, "se": e.se}
                           for b, e in zip(self.betas, self.theta)]}


def linear_lower_bound(beta_c: float, betas, thetas: list[Estimate]) -> tuple[float, float, bool]:
    """Certified slope, least-squares slope through (beta_c, 0), and the verdict.

    The certified slope is the largest c with c (beta - beta_c) below every
    lower Wilson limit; the verdict asks for c > 0 and
    theta_hat >= c (beta - beta_c) - 2 SE at every grid point.
    """
    x = np.array([b - beta_c for b in betas], dtype=np.float64)
    y = np.array([e.value for e in thetas])
    lo = np.array([e.lo for e in thetas])
    se = np.array([e.se for e in thetas])
    pos = x > 0
    if not pos.any():
        return 0.0, 0.0, True
    c_hat = float((lo[pos] / x[pos]).min())
    c_ls = float((x[pos] * y[pos]).sum() / (x[pos] ** 2).sum())
    verdict = bool(c_hat > 0 and np.all(y >= c_hat * x - 2.0 * se))
    return c_hat, c_ls, verdict


def near_critical_slope(family: ConnectionFamily, q: int, beta_grid, beta_c: float, R_proxy: float, n: int,
                        master_seed: int, threads: int = 1, d: int = 2) -> NearCriticalResult:
    """theta_{R_proxy} as a stand-in for theta_infinity, tested against c (beta - beta_c)."""
    betas = [float(b) for b in beta_grid]
    if any(b < beta_c for b in betas):
        raise ValueError("every grid point must be >= the critical estimate")
    if R_proxy <= family.D:
        raise ValueError("R_proxy must exceed D")
    sweep = theta_sweep(family, q, betas, [R_proxy], n, master_seed, threads, d)
    thetas = [sweep.theta(b, R_proxy) for b in range(len(betas))]
    c_hat, c_ls, verdict = linear_lower_bound(beta_c, betas, thetas)
    return NearCriticalResult(float(beta_c), betas, thetas, c_hat, c_ls, verdict, float(R_proxy))


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=float)
