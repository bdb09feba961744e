"""Acceptance criteria, one test per item.

Each test prints a single ``[ACCEPTANCE n] PASS|FAIL`` line straight to the
terminal (not captured), so ``pytest tests/test_acceptance.py -v`` reads as
a checklist.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import random_policy

from mvi import bench, certify, chain, complexity, generators, oracle, solvers
from mvi.bellman import apply_optimality, residual_average, residual_discounted
from mvi.mdp import span, sup_norm

REL = 1e-9


@pytest.fixture
def report(capsys):
    def emit(item, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPTANCE {item}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def le(lhs, rhs):
    """lhs <= rhs with the relative slack used for theorem constants."""
    return lhs <= rhs + 1e-9 * max(1.0, abs(rhs))


def suite_truth():
    return [(label, m, oracle.ground_truth(m, reference=ref)) for label, m, ref in generators.builtin_suite()]


def test_01_performance_difference(report):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 9))
        m = generators.gen_random(n, 3, seed, max_actions=3)
        rho_star, _ = oracle.optimal_gain_bruteforce(m)
        pi = random_policy(m, rng, randomized=bool(seed % 2))
        h = rng.uniform(-5, 5, n)
        worst = max(worst, certify.performance_difference(m, pi, h, rho_star).identity_residual)
    report(1, worst <= 1e-8, f"worst identity residual {worst:.3e} over 100 cases (tol 1e-8)")


def test_02_complexity_parameters(report):
    bad = []
    for k, T, eps in [(2, 5, 0.1), (10, 20, 0.05), (300, 10, 0.5)]:
        m = generators.gen_mkt(k, T, eps, seed=0)
        gt = oracle.ground_truth(m, reference=generators.mkt_optimal_policy(k))
        d, td = gt.delta, complexity.tdrop(m, gt.rho_star)
        if abs(d - eps / T) > REL * eps / T or abs(td - T) > REL * T:
            bad.append(f"M({k},{T},{eps}): delta={d!r} tdrop={td!r}")
    for eps in (0.5, 0.05):
        m = generators.gen_four_state(eps)
        gt = oracle.ground_truth(m)
        td = complexity.tdrop(m, gt.rho_star)
        ok = (
            np.allclose(gt.rho_star, [1, 1 - eps, 0, 1], rtol=REL, atol=0)
            and abs(span(gt.h_unmod) - 1) <= REL
            and abs(td - 1) <= REL
            and abs(gt.delta - eps) <= REL * eps
        )
        if not ok:
            bad.append(f"four-state({eps}): rho*={gt.rho_star} span={span(gt.h_unmod)} tdrop={td} delta={gt.delta}")
    report(2, not bad, "; ".join(bad) or "delta = eps/T, T_drop = T and four-state values within relative 1e-9")


def test_03_parameter_orderings(report):
    worst = -math.inf
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m = generators.gen_random_multichain(
            int(rng.integers(1, 4)), 2, 2, float(rng.choice([0.0, 0.3, 0.6])), seed, n_transient=int(rng.integers(0, 3))
        )
        rho, _ = oracle.optimal_gain_bruteforce(m)
        rep = complexity.complexity_report(m, rho, enumerate_all=True)
        inv = 0.0 if math.isinf(rep.delta) else 1.0 / rep.delta
        worst = max(worst, rep.tdrop - rep.b, rep.tdrop - inv)
    report(3, worst <= 1e-9, f"max(T_drop - B, T_drop - 1/Delta) = {worst:.3e} over 50 instances")


def test_04_policy_evaluation_rate(report):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = generators.gen_random_multichain(2, 2, 2, 0.4, seed, n_transient=2) if seed % 2 else \
            generators.gen_random(int(rng.integers(2, 8)), 3, seed)
        pi = random_policy(m, rng)
        a = chain.analyze(m, pi)
        h0 = rng.uniform(-5, 5, m.n_states)
        dist = sup_norm(h0 - a.bias)
        rep = solvers.policy_eval_halpern(m, pi, h0, 500)
        for t, res in enumerate(rep.trace.residual_seq):
            worst = max(worst, res - 2 / (t + 1) * dist)
    report(4, worst <= 1e-9, f"max(residual - 2/(t+1) dist) = {worst:.3e}, t <= 500, 20 cases")


def _alg1_instances():
    return [
        ("four-state eps=0.5", generators.gen_four_state(0.5), generators.four_state_optimal_policy()),
        ("four-state eps=0.05", generators.gen_four_state(0.05), generators.four_state_optimal_policy()),
        ("M(2,5,0.1)", generators.gen_mkt(2, 5, 0.1, 0), generators.mkt_optimal_policy(2)),
    ]


def test_05_algorithm1_bounds(report):
    bad, large = [], 0
    for label, m, ref in _alg1_instances():
        gt = oracle.ground_truth(m, reference=ref)
        tdrop = complexity.tdrop(m, gt.rho_star)
        h0 = np.zeros(m.n_states)
        dist = sup_norm(h0 - gt.h_both)
        for n in (1, 2, 5, 10, 50, 200):
            rep = solvers.approx_shifted_halpern(m, h0, n)
            fpe = residual_average(m, rep.output_value, gt.rho_star)
            sub = certify.suboptimality(m, rep.output_policy, gt.rho_star)
            if not le(fpe, certify.alg1_poly(n) / n * dist):
                bad.append(f"{label} n={n} fpe {fpe:.3e}")
            if not le(sub, (10 / 3 * tdrop + certify.alg1_poly(n)) / n * dist):
                bad.append(f"{label} n={n} subopt {sub:.3e}")
            if n >= 4 * dist / gt.delta:
                large += 1
                pi = rep.output_policy
                flagged = pi.project(m, complexity.gain_dropping_reward(m, gt.rho_star)).sum()
                drop = sup_norm(m.P[pi.flat_index(m)] @ gt.rho_star - gt.rho_star)
                if flagged != 0.0 or drop > 1e-12:
                    bad.append(f"{label} n={n} gain drop {drop!r}, {flagged:g} dropping actions")
    report(5, not bad, "; ".join(bad) or f"all 18 runs within bounds; {large} large-n runs keep P rho* = rho* exactly")


def test_06_gain_estimation(report):
    worst_t, worst_r = -math.inf, -math.inf
    for label, m, ref in _alg1_instances():
        gt = oracle.ground_truth(m, reference=ref)
        for seed in range(3):
            h0 = np.zeros(m.n_states) if seed == 0 else np.random.default_rng(seed).uniform(-5, 5, m.n_states)
            dist = sup_norm(h0 - gt.h_both)
            x = h0.copy()
            for n in range(1, 201):
                x = apply_optimality(m, x)
                worst_t = max(worst_t, sup_norm(x - n * gt.rho_star - gt.h_both) - dist)
                worst_r = max(worst_r, sup_norm((x - h0) / n - gt.rho_star) - 2 * dist / n)
    ok = worst_t <= 1e-9 and worst_r <= 1e-9
    report(6, ok, f"max excess: iterate {worst_t:.3e}, rho_hat {worst_r:.3e} for n <= 200")


def test_07_halpern_then_picard(report):
    worst, worst_h = -math.inf, -math.inf
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = generators.gen_random(int(rng.integers(2, 9)), 3, seed, max_actions=3)
        for gamma in (0.5, 0.9, 0.99):
            v_star, _ = oracle.discounted_optimal(m, gamma)
            x0 = rng.uniform(-20, 20, m.n_states)
            dist = sup_norm(x0 - v_star)
            rep = solvers.halpern_then_picard(solvers.bellman_operator(m, gamma), x0, 1000)
            E = rep.meta["E"]
            for t, res in enumerate(rep.trace.residual_seq):
                bound = 8 * math.e * gamma**t / certify.horizon_sum(gamma, t) * dist
                worst = max(worst, (res - bound) / max(1.0, bound))
                if t <= E:
                    worst_h = max(worst_h, (res - 4 / (t + 1) * dist) / max(1.0, dist))
    ok = worst <= 1e-9 and worst_h <= 1e-9
    report(7, ok, f"max relative excess: full bound {worst:.3e}, halpern phase {worst_h:.3e}")


def test_08_warm_start_value_error(report):
    worst = -math.inf
    for label, m, gt in suite_truth():
        M = certify.complexity_m(gt, complexity.tdrop(m, gt.rho_star))
        for gamma in (0.9, 0.99):
            v_star, _ = oracle.discounted_optimal(m, gamma)
            x = np.zeros(m.n_states)
            for t in range(1, solvers.effective_horizon(gamma) + 1):
                x = apply_optimality(m, x)
                scale = t * (1 - gamma)
                bound = 2 * M / scale
                worst = max(worst, (sup_norm(x / scale - v_star) - bound) / max(1.0, bound))
    report(8, worst <= 1e-9, f"max relative excess {worst:.3e} over the built-in suite")


def test_09_solve_multichain(report):
    bad, n_checks = [], 0
    for label, m, gt in suite_truth():
        tdrop = complexity.tdrop(m, gt.rho_star)
        M = certify.complexity_m(gt, tdrop)
        for n in (8, 16, 64, 256):
            for k, const in ((0.0, 71.0), (4.0, 7 + 64 * math.exp(-4))):
                rep = solvers.solve_multichain(m, n, extra_k=k)
                gap = gt.rho_star - chain.gain(m, rep.output_policy)
                bound = (tdrop + 1) * (const * M + 2) / (n - 1)
                n_checks += 1
                if not np.all(gap <= bound + 1e-9 * max(1.0, bound)):
                    bad.append(f"{label} n={n} k={k:g}: {gap.max():.3e} > {bound:.3e}")
    report(9, not bad, "; ".join(bad) or f"{n_checks} runs within the entrywise bound")


def test_10_discounted_baseline(report):
    bad = []
    for label, m, gt in suite_truth():
        _, b = complexity.transient_time_bound(m)
        for n in (10, 100, 1000):
            rep = solvers.dmdp_baseline(m, n)
            sub = certify.suboptimality(m, rep.output_policy, gt.rho_star)
            bound = 2 * (3 * b + 3 * span(gt.h_unmod) + 2) * math.log(n) / n
            if not le(sub, bound):
                bad.append(f"{label} n={n}: {sub:.3e} > {bound:.3e}")
    report(10, not bad, "; ".join(bad) or "suboptimality within 2(3B + 3 span + 2) ln(n)/n")


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    out, t0 = {}, time.perf_counter()
    for eps in (0.5, 0.05):
        cfg = bench.ExperimentConfig(
            instance={"kind": "mkt", "k": 300, "T": 10, "eps": eps},
            algorithms=["vi", "alg1"],
            n=150,
            outputs={"csv": True, "svg": True, "json": False},
            out_dir=str(tmp_path_factory.mktemp(f"exp{eps}")),
        )
        res = bench.run_experiment(cfg)
        out[eps] = {alg: [row[1] for row in res.traces[(alg, 0)]] for alg in cfg.algorithms}
    out["seconds"] = time.perf_counter() - t0
    return out


def test_11a_vi_oscillates(report, experiment):
    parts, ok = [], True
    for eps in (0.5, 0.05):
        fpe = np.array(experiment[eps]["vi"])
        d = np.diff(fpe)
        d = d[d != 0]
        flips = int(np.sum(np.sign(d[1:]) != np.sign(d[:-1])))
        ok &= flips >= 10 and fpe.min() >= 0.1
        parts.append(f"eps={eps}: {flips} sign changes, min {fpe.min():.4f}")
    report("11a", ok, "; ".join(parts))


def test_11b_alg1_beats_vi(report, experiment):
    parts, ok = [], True
    for eps in (0.5, 0.05):
        a, v = experiment[eps]["alg1"][-1], min(experiment[eps]["vi"])
        ok &= a < v
        parts.append(f"eps={eps}: alg1 {a:.4e} vs VI min {v:.4e}")
    report("11b", ok, "; ".join(parts))


def test_11c_eps_insensitive(report, experiment):
    a, b = experiment[0.5]["alg1"][-1], experiment[0.05]["alg1"][-1]
    rel = abs(a - b) / max(a, b)
    ok = rel < 0.10 and experiment["seconds"] <= 60
    report("11c", ok, f"final residuals {a:.4e} / {b:.4e}, relative gap {rel:.3%}; runtime {experiment['seconds']:.1f}s")


def test_12_structural_suite(report):
    here = Path(__file__).parent
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(here / "test_properties.py")],
        capture_output=True, text=True, cwd=here.parent,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-300:]
    report(12, proc.returncode == 0, f"property suite (1000 cases per property): {summary}")
