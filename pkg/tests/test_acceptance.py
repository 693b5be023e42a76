"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own pass/fail report.  Every tolerance is pinned
here; nothing is deferred to later calibration.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from menugame import (
    BRConfig,
    MarketInstance,
    approx_policy,
    br_dynamics,
    canonical_subset_candidates,
    check_stability,
    check_unrest,
    ec_box,
    eta,
    f_star_index,
    fair_policy,
    falsify_subset,
    gamma_bar,
    h_index,
    oracle_optimum,
    policy_evaluate,
    search_external_tail,
    solve_dp,
    thresholds_eta_tilde,
    unified_utility,
    verify_eps_nash,
    verify_nash,
)
from menugame.cli import main as cli_main
from menugame.sellers import menu_members, unified_utility_candidates
from menugame.smallgamma import f_star_menu

from conftest import random_profile, tied_profile

INSTANCES = Path(__file__).resolve().parent.parent / "instances"

FIG3 = MarketInstance(5, 3, 0.1, (1.0,) * 5, (0.1, 0.2, 0.3, 0.4, 0.5))
FIG2_BASE = [0.5, 0.25, 0.12, 0.055, 0.027, 0.013, 0.006]


def report(num: int, text: str) -> None:
    print(f"\nACCEPTANCE {num:02d} PASS — {text}")


def test_01_dp_equals_oracle():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(1, 4))
        inst = MarketInstance(
            n, m, float(rng.uniform(0.1, 0.9)),
            tuple(rng.uniform(0.5, 2.0, n)),
            tuple(rng.uniform(0.0, 0.3, n)),
        )
        delta = random_profile(rng, n)
        table, _ = solve_dp(inst, delta)
        value, _ = oracle_optimum(inst, delta)
        gap = abs(table.optimum() - value) / max(1.0, abs(value))
        worst = max(worst, gap)
        assert gap <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(1, f"DP equals oracle on 20 instances (worst gap {worst:.2e}, {elapsed:.2f}s)")


def test_02_small_gamma_policy_identity():
    rng = np.random.default_rng(1002)
    for _ in range(10):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(2, min(3, n - 1) + 1))
        inst = MarketInstance(
            n, m, 0.5, tuple(rng.uniform(0.5, 2.0, n)), (0.0,) * n
        )
        delta = random_profile(rng, n)
        f = f_star_index(inst, delta)
        assert len(np.unique(np.round(f, 12))) == n  # strictly decreasing sorted values
        bar = gamma_bar(inst, delta)
        assert bar > 0.0
        policy = fair_policy(inst.with_gamma(0.01), delta)
        assert policy.is_deterministic()
        assert policy.support[0][0].menu == f_star_menu(inst, delta)
    report(2, "fair policy equals the index menu below a positive exploration threshold")


def test_03_approx_prices_exact():
    rng = np.random.default_rng(1003)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        alpha = tuple(rng.uniform(0.3, 3.0, n))
        inst = MarketInstance(n, int(rng.integers(1, n + 1)), 0.4, alpha, (0.0,) * n)
        policy = approx_policy(inst, random_profile(rng, n))
        for pm, _ in policy.support:
            for pos, a in enumerate(pm.menu):
                assert pm.prices[pos] == 1.0 / alpha[a]
                assert float(inst.beta(a, pm.prices[pos])) == pytest.approx(
                    math.exp(-1), abs=1e-12
                )
    report(3, "approximate-policy prices are exactly 1/alpha with purchase odds 1/e")


def test_04_h_index_ranking_equivalence():
    rng = np.random.default_rng(1004)
    for _ in range(100):
        n = int(rng.integers(3, 8))
        alpha = tuple(rng.uniform(0.5, 2.0, n))
        delta = random_profile(rng, n)
        for g in (0.1, 0.3, 0.5, 0.7, 0.9):
            inst = MarketInstance(n, 2, g, alpha, (0.0,) * n)
            assert list(np.argsort(-h_index(inst, delta))) == list(
                np.argsort(-f_star_index(inst, delta))
            )
    report(4, "h-index and immediate-reward index rank identically on 100 instances x 5 gammas")


def test_05_unified_utility_oracle_equivalence():
    rng = np.random.default_rng(1005)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(3, 7))
        m = int(rng.integers(1, n))
        with_ties = trial % 5 < 2
        alpha = np.full(n, float(rng.uniform(0.5, 2.0))) if with_ties else rng.uniform(0.5, 2.0, n)
        cost = rng.uniform(0.0, 0.3 / alpha)
        inst = MarketInstance(n, m, float(rng.uniform(0.05, 0.9)), tuple(alpha), tuple(cost))
        delta = tied_profile(rng, n) if with_ties else random_profile(rng, n)
        closed = unified_utility(inst, delta)
        evaluated = policy_evaluate(inst, delta, approx_policy(inst, delta)).seller_array()
        worst = max(worst, float(np.max(np.abs(closed - evaluated))))
        assert closed == pytest.approx(evaluated, abs=1e-9)
    report(5, f"closed-form seller utility matches policy evaluation (worst gap {worst:.2e})")


def test_06_accuracy_envelopes():
    bounds = {0.2: 0.015, 0.4: 0.03, 0.7: 0.07}
    errors = {}
    for g, bound in bounds.items():
        inst = MarketInstance(7, 3, g, (1.0,) * 7, (0.0,) * 7)
        rows = []
        for d in np.linspace(0.05, 0.95, 19):
            delta = list(FIG2_BASE)
            delta[0] = d
            fair = fair_policy(inst, delta)
            approx = approx_policy(inst, delta)
            if not (fair.is_deterministic() and approx.is_deterministic()):
                continue
            exact_u = policy_evaluate(inst, delta, fair).seller_utility[0]
            approx_u = policy_evaluate(inst, delta, approx).seller_utility[0]
            rows.append((exact_u, approx_u))
        assert len(rows) >= 15
        scale = max(abs(e) for e, _ in rows)
        errors[g] = max(abs(e - a) for e, a in rows) / scale
        assert errors[g] <= bound, f"gamma {g}: {errors[g]:.4f} > {bound}"
    assert errors[0.2] <= errors[0.4] <= errors[0.7]
    report(
        6,
        "approximation error envelopes hold: "
        + ", ".join(f"{e * 100:.2f}% at gamma {g:g}" for g, e in sorted(errors.items())),
    )


def test_07_equal_sellers_nash():
    inst = MarketInstance(3, 2, 0.1, (1.0,) * 3, (0.3,) * 3)
    profile = [0.7, 0.7, 0.7]
    result = verify_nash(inst, profile, grid=1001, tol=1e-9)
    assert result.passed
    util = unified_utility(inst, profile)
    assert list(util) == [0.0, 0.0, 0.0]
    report(7, "equal-strength profile verified as Nash with exactly zero utilities")


def test_08_eps_nash_bound():
    alpha = (1.0, 1.0, 1.0, 1.0)

    def build(etas):
        return MarketInstance(4, 2, 0.1, alpha, tuple(1.0 - e for e in etas))

    def ladder(etas):
        return [etas[1], etas[2], etas[2], etas[3]]

    tight = (0.9, 0.89, 0.88, 0.87)
    bound = (tight[0] - tight[2]) / min(math.e * min(alpha), 1.0)
    assert verify_eps_nash(build(tight), ladder(tight), bound + 1e-9).passed

    spread = (0.9, 0.7, 0.5, 0.3)
    small_eps = (spread[0] - spread[2]) / min(math.e * min(alpha), 1.0) / 10.0
    failed = verify_eps_nash(build(spread), ladder(spread), small_eps)
    assert not failed.passed
    assert failed.violations[0]["gain"] > small_eps
    report(8, "epsilon-equilibrium passes at the hypothesis bound and fails at a tenth of it")


def test_09_br_dynamics_oscillation():
    start_time = time.perf_counter()
    cfg = BRConfig(grid_step=1e-3, undercut=1e-3, epsilon=1e-4,
                   max_iters=500, burn_in=100, rng_seed=20260810)
    trace = br_dynamics(FIG3, [0.65, 0.63, 0.61, 0.6, 0.5], cfg)
    elapsed = time.perf_counter() - start_time

    assert not trace.converged  # (a)

    box = ec_box(FIG3)
    slack = cfg.grid_step + cfg.undercut
    post = trace.post_burn_in()
    membership = np.mean([box.contains(row, slack=slack) for row in post])
    assert membership >= 0.99  # (b)

    for row in post:  # (c)
        assert menu_members(FIG3, row) == {0, 1, 2}

    spans = [hi - lo for lo, hi in trace.seller_ranges()[:3]]
    assert all(s >= 0.05 for s in spans)  # (d)

    assert elapsed < 30.0
    report(
        9,
        f"dynamics oscillate: membership {membership * 100:.1f}%, "
        f"top-3 spans {', '.join(f'{s:.3f}' for s in spans)}, {elapsed:.2f}s",
    )


def test_10_mu_ec_properties():
    box = ec_box(FIG3)
    stability = check_stability(FIG3, box, 1000, rng_seed=424242)
    assert stability.passed and len(stability.violations) == 0
    unrest = check_unrest(FIG3, box, 1000, rng_seed=424242)
    assert unrest.passed and len(unrest.violations) == 0

    for name, cand in canonical_subset_candidates(FIG3, shrink=0.02):
        rep = falsify_subset(FIG3, cand, 300, rng_seed=424242)
        assert rep.details["first_violated"] is not None, name
        assert len(rep.violations) > 0

    start = np.array([box.hi[0], box.hi[1], 0.65, 0.6, 0.5])
    for eps in (1e-4, 1e-3):
        chain = search_external_tail(FIG3, box, start, eps, max_depth=2)
        assert chain is None or len(chain) <= 1
    report(10, "stability and unrest hold at 1000 samples; sub-boxes falsified; no deep external tail")


def test_11_threshold_property():
    rng = np.random.default_rng(1011)
    box = ec_box(FIG3)
    tl = thresholds_eta_tilde(FIG3)
    threat = eta(FIG3)[FIG3.menu_size]
    lo, hi = np.asarray(box.lo), np.asarray(box.hi)
    for _ in range(200):
        k = int(rng.integers(FIG3.menu_size))
        profile = lo + rng.random(5) * (hi - lo)
        delta_above = float(rng.uniform(tl[k] + 1e-9, 1.0))
        u_above = unified_utility_candidates(FIG3, profile, k, [delta_above])[0]
        cands = np.linspace(threat, tl[k], 2001)
        matches = np.array([profile[j] for j in range(5) if j != k])
        extras = np.concatenate([matches + 1e-3, matches - 1e-3])
        cands = np.unique(np.concatenate([cands, extras[(extras >= threat) & (extras <= tl[k])]]))
        assert unified_utility_candidates(FIG3, profile, k, cands).max() > u_above
    report(11, "a strictly better in-range commission was found for all 200 above-threshold triples")


def test_12_determinism(tmp_path):
    def run(argv):
        try:
            return cli_main(argv)
        except SystemExit as exc:
            return exc.code

    blobs = []
    for tag in ("a", "b"):
        trace = tmp_path / f"trace_{tag}.csv"
        summary = tmp_path / f"summary_{tag}.json"
        code = run([
            "br-dynamics", "--instance", str(INSTANCES / "fig3.json"),
            "--delta-init", "0.65,0.63,0.61,0.6,0.5",
            "--seed", "99", "--max-iters", "200", "--burn-in", "50",
            "--out", str(trace), "--summary", str(summary), "--no-plot",
        ])
        assert code == 0
        ec = tmp_path / f"ec_{tag}.json"
        code = run([
            "verify", "ec", "--instance", str(INSTANCES / "fig3.json"),
            "--samples", "50", "--seed", "99", "--out", str(ec),
        ])
        assert code == 0
        blobs.append((trace.read_bytes(), summary.read_bytes(), ec.read_bytes()))
    assert blobs[0] == blobs[1]
    report(12, "repeated seeded commands produced byte-identical artifacts")
