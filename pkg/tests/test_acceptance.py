"""The twelve acceptance criteria at their stated sizes; one summary line each."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import brute_complex, record
from rcmperc import (CubeGrid, MarkLaw, Window, boolean_balls, build, cech, diam_kernel, duality_check, event_B_r,
                     restrict, sample, verify_v1_v2, vietoris_rips, window_for_radius)
from rcmperc.cli import main
from rcmperc.estimation import decay_fit, estimate_beta_c, near_critical_slope
from rcmperc.exploration import explore, osss_check
from rcmperc.graphs import cluster_reach

D = 0.8
VR0 = vietoris_rips(0.3, alpha=1, D=D)  # VR threshold 0.6
VR2 = vietoris_rips(0.3, alpha=2, D=D)
SEED = 20240601


def window(r: float) -> Window:
    return window_for_radius(r, CubeGrid(2, D), D)


@pytest.fixture(scope="session")
def beta_c_runs():
    q0 = estimate_beta_c(VR0, 0, 4.0, 8.0, (2.0, 6.0), 1000, SEED, n_beta=13)
    q1 = estimate_beta_c(VR2, 1, 4.0, 8.0, (4.0, 10.0), 400, SEED + 1, n_beta=13)
    return q0, q1


@pytest.fixture(scope="session")
def beta_c_hat(beta_c_runs):
    return beta_c_runs[0].crossing.beta_c_hat


def test_c1_exploration_oracle():
    W = window(4.0)
    agree = 0
    for k in range(1000):
        real = sample(SEED + k, 4.0, W, VR0.mark_law, with_origin=True)
        cx = build(real, VR0)
        agree += explore(real, VR0, 0, 4.0, 2.0, complex_=cx).decision == event_B_r(cx, 0, 4.0).occurred
    record("C1", agree == 1000, f"exploration vs B_r: {agree}/1000 agree")
    assert agree == 1000


def test_c2_builder_oracle():
    fams = [vietoris_rips(0.3, alpha=3, D=D), cech(0.35, alpha=3, D=D),
            diam_kernel(["exp:0.4", "const:0.6", "linear:0.9"], D=D),
            boolean_balls(MarkLaw.uniform_radius(0.1, 0.35), alpha=3, D=D)]
    W = Window(CubeGrid(2, D), (0, 1, 2))
    done = agree = 0
    seed = 0
    while done < 500:
        fam = fams[done % len(fams)]
        real = sample(seed, 1.0, W, fam.mark_law, with_origin=True)
        seed += 1
        if real.n > 12:
            continue
        done += 1
        agree += build(real, fam).simplex_sets() == brute_complex(real, fam, fam.alpha)
    record("C2", agree == 500, f"builder vs exhaustive subsets: {agree}/500 agree")
    assert agree == 500


def test_c3_duality():
    fam = vietoris_rips(0.3, alpha=3, D=D)
    W = window(1.5)
    ok = sum(duality_check(build(sample(SEED + k, 6.0, W, with_origin=True), fam), q)
             for k in range(100) for q in (0, 1))
    record("C3", ok == 200, f"up/down duality: {ok}/200 complexes")
    assert ok == 200


def test_c4_cech_is_boolean_with_fixed_balls():
    r = 0.35
    c = cech(r, alpha=3, D=D)
    b = boolean_balls(MarkLaw.fixed_radius(r), alpha=3, D=D)
    W = window(2.0)
    same = 0
    for k in range(100):
        rc = sample(SEED + k, 4.0, W, c.mark_law, with_origin=True)
        rb = sample(SEED + k, 4.0, W, b.mark_law, with_origin=True)
        same += np.array_equal(rc.positions, rb.positions) and build(rc, c).id_sets() == build(rb, b).id_sets()
    record("C4", same == 100, f"Cech vs Boolean(r): {same}/100 identical")
    assert same == 100


def test_c5_coupled_monotonicity():
    W = window(4.0)
    rs = [1.0, 2.0, 3.0, 4.0]
    bad_r = bad_q = 0
    for k in range(1000):
        cx = build(sample(SEED + k, 6.0, W, with_origin=True), VR2)
        b0 = [event_B_r(cx, 0, r, witness=False).occurred for r in rs]
        b1 = [event_B_r(cx, 1, r, witness=False).occurred for r in rs]
        bad_r += sum(later and not earlier for seq in (b0, b1) for earlier, later in zip(seq, seq[1:]))
        bad_q += sum(x and not y for x, y in zip(b1, b0))
    record("C5", bad_r == 0 and bad_q == 0, f"violations over 1000 samples: in r {bad_r}, q=1 without q=0 {bad_q}")
    assert bad_r == 0 and bad_q == 0


def test_c6_restriction():
    fam = diam_kernel(["exp:0.4", "const:0.6", "linear:0.9"], D=D)
    big, small = window(3.0), window(1.5)
    same = sum(restrict(build(sample(SEED + k, 3.0, big, with_origin=True), fam), small).to_json()
               == build(sample(SEED + k, 3.0, small, with_origin=True), fam).to_json() for k in range(100))
    record("C6", same == 100, f"restrict(build(W')) == build(W): {same}/100 byte-identical")
    assert same == 100


def test_c7_functional_bounds():
    cases = {"VR": (vietoris_rips(0.3, alpha=2, D=0.6), 1),
             "Cech": (cech(0.3, alpha=2, D=0.6), 1),
             "Boolean": (boolean_balls(MarkLaw.uniform_radius(0.1, 0.3), alpha=2), 1),
             "DiamKernel": (diam_kernel(["exp:0.5", "step:1.0:0.8"], D=0.8), 1)}
    bad = []
    for name, (fam, q) in cases.items():
        rep = verify_v1_v2(fam, q, 10_000, seed=SEED)
        if not (rep.v1_ok and rep.v2_ok):
            bad.append(name)
    record("C7", not bad, f"V1/V2 over 10^4 tuples each: violations in {bad or 'none'}")
    assert not bad


def test_c8_osss():
    rows, ok = [], True
    for beta in (1.0, 2.0, 4.0):
        res = osss_check(beta, VR0, 0, 4.0, 2.0, 2000, SEED)
        ok &= res.holds
        rows.append(f"beta {beta:g}: {res.lhs:.4f} <= {res.rhs:.4f} + 3*{res.se:.4f}")
    record("C8", ok, "; ".join(rows))
    assert ok


def test_c9_subcritical_decay(beta_c_hat):
    fit = decay_fit(VR0, 0, 0.5 * beta_c_hat, list(range(2, 9)), 4000, SEED)
    record("C9", fit.exponential, f"beta {0.5 * beta_c_hat:.3f}: slope {fit.slope:.3f}, R^2 {fit.r2:.4f}")
    assert fit.exponential


def test_c10_sharpness_onset(beta_c_hat):
    res = near_critical_slope(VR0, 0, [beta_c_hat * f for f in (1.1, 1.2, 1.4)], beta_c_hat, 10.0, 2000, SEED)
    th = ", ".join(f"{e.value:.3f}" for e in res.theta)
    record("C10", res.verdict, f"beta_c {beta_c_hat:.3f}: theta_10 [{th}], c_hat {res.c_hat:.3f}")
    assert res.verdict


def test_c11_beta_c_consistency(beta_c_runs):
    q0, q1 = beta_c_runs
    cr, bi, c1 = q0.crossing, q0.bisection, q1.crossing
    agree = q0.agree
    ordered = c1 is not None and cr.ci[0] <= c1.ci[1]
    gilbert = 4.5122 / (math.pi * 0.6**2)  # published critical mean degree of the disc graph
    record("C11", agree and ordered,
           f"q=0 crossing {cr.beta_c_hat:.3f} {tuple(round(x, 3) for x in cr.ci)}, "
           f"bisection {bi.beta_c_hat:.3f} {tuple(round(x, 3) for x in bi.ci)}, agree {agree}; "
           f"q=1 crossing {c1.beta_c_hat:.3f} {tuple(round(x, 3) for x in c1.ci)}, ordered {ordered}; "
           f"disc-graph reference {gilbert:.3f}")
    assert ordered
    assert agree


def test_c12_parallel_determinism(tmp_path):
    fam = "vr:r=0.3,D=0.8"
    runs = {
        "sweep": (["--beta", "2,4", "--r", "2,4", "--n", "100"], ["sweep.csv", "sweep.json"]),
        "betac": (["--n", "60", "--bracket", "2.5,5.5"], ["betac.json", "betac_sweep.csv"]),
        "decay": (["--beta", "2", "--r", "2,3,4", "--n", "200"], ["decay.json"]),
        "osss": (["--beta", "2", "--r", "3", "--s", "1.5", "--n", "60"], ["osss.json", "osss_cubes.csv"]),
    }
    diffs = []
    for cmd, (extra, files) in runs.items():
        for t in ("1", "8"):
            code = main([cmd, "--family", fam, "--seed", str(SEED), "--threads", t,
                         "--out", str(tmp_path / cmd / t)] + extra)
            assert code == 0, (cmd, t)
        diffs += [f"{cmd}/{f}" for f in files
                  if (tmp_path / cmd / "1" / f).read_bytes() != (tmp_path / cmd / "8" / f).read_bytes()]
    record("C12", not diffs, f"threads 1 vs 8: {len(diffs)} differing files {diffs or ''}".rstrip())
    assert not diffs


def test_reach_is_a_faithful_shortcut():
    # the estimators read B_r off the cluster reach; check that against the event itself
    W = window(8.0)
    for k in range(50):
        cx = build(sample(SEED + k, 4.0, W, with_origin=True), VR0)
        reach = cluster_reach(cx, 0)
        for r in (2.0, 4.0, 8.0):
            assert (reach > r) == event_B_r(cx, 0, r, witness=False).occurred
