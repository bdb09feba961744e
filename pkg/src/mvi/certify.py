"""Numerical certification of the identities and convergence bounds.

A :class:`BoundCheck` passes when ``lhs <= rhs + 1e-9 * max(1, |rhs|)``:
the constants on the right are exact, the left side carries float error.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import chain, complexity, oracle, solvers
from .bellman import apply_evaluation, apply_optimality, residual_average, residual_discounted
from .errors import NotEpsGreedy
from .mdp import Mdp, as_policy, check_length, policy_count, span, sup_norm

REL_SLACK = 1e-9
EPS_GREEDY_SLACK = 1e-12
EXACT_TOL = 1e-12


@dataclass
class BoundCheck:
    label: str
    lhs: float
    rhs: float
    n: int | None = None
    detail: dict = field(default_factory=dict)
    tol: float | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        slack = REL_SLACK * max(1.0, abs(self.rhs)) if self.tol is None else self.tol
        return bool(self.lhs <= self.rhs + slack)

    @property
    def ratio(self) -> float | None:
        return self.lhs / self.rhs if self.rhs > 0 else None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "ratio": self.ratio,
            "pass": self.passed,
            **({"detail": self.detail} if self.detail else {}),
        }


# --------------------------------------------------------------------------
# shared quantities


def complexity_m(gt: oracle.GroundTruth, tdrop: float) -> float:
    """min{span(h_both), span(h_unmod) + T_drop + span(h_unmod) T_drop}."""
    s = span(gt.h_unmod)
    return min(span(gt.h_both), s + tdrop + s * tdrop)


def horizon_sum(gamma: float, t: int) -> float:
    """sum_{i=0}^{t} gamma^i."""
    return math.fsum(gamma**i for i in range(t + 1))


def suboptimality(mdp: Mdp, pi, rho_star) -> float:
    return sup_norm(rho_star - chain.gain(mdp, pi))


# --------------------------------------------------------------------------
# sensitivity decomposition and discounted reduction


@dataclass
class PerformanceDifference:
    identity_residual: float
    drop_term: np.ndarray
    evaluation_term: np.ndarray
    check: BoundCheck

    def to_dict(self) -> dict:
        return {
            "identity_residual": self.identity_residual,
            "drop_term": self.drop_term.tolist(),
            "evaluation_term": self.evaluation_term.tolist(),
            "check": self.check.to_dict(),
        }


def performance_difference(mdp: Mdp, pi, h, rho_star) -> PerformanceDifference:
    """Both sides of rho^pi - rho* = H(P_pi rho* - rho*) + P_inf(r_pi + P_pi h - rho* - h).

    The companion inequality uses the expected time spent in states where
    ``P_pi rho* < rho*`` as the multiplier; see
    :func:`mvi.complexity.drop_state_time`.
    """
    pi = as_policy(pi)
    h = check_length(h, mdp)
    rho_star = check_length(rho_star, mdp)
    a = chain.analyze(mdp, pi)
    gain_drop = a.P_pi @ rho_star - rho_star
    drop_term = a.H @ gain_drop
    evaluation_term = a.P_inf @ (a.r_pi + a.P_pi @ h - rho_star - h)
    lhs = a.gain - rho_star
    residual = sup_norm(lhs - drop_term - evaluation_term)

    multiplier = complexity.drop_state_time(mdp, pi, rho_star, a)
    rhs = multiplier * sup_norm(gain_drop) + sup_norm(apply_evaluation(mdp, pi, h) - h - rho_star)
    check = BoundCheck("sensitivity corollary", sup_norm(lhs), rhs, detail={"tdrop_pi": multiplier})
    return PerformanceDifference(residual, drop_term, evaluation_term, check)


def reduction_bound(mdp: Mdp, V, gamma, pi, eps_greedy, gt: oracle.GroundTruth, tdrop=None) -> list[BoundCheck]:
    """The three forms of the discounted-to-average reduction for an eps-greedy pi."""
    pi = as_policy(pi)
    V = check_length(V, mdp)
    TV = apply_optimality(mdp, V, gamma)
    shortfall = float(np.max(TV - eps_greedy - apply_evaluation(mdp, pi, V, gamma)))
    if shortfall > EPS_GREEDY_SLACK:
        raise NotEpsGreedy(shortfall)
    rho_star = gt.rho_star
    if tdrop is None:
        tdrop = complexity.tdrop(mdp, rho_star)
    M = complexity_m(gt, tdrop)
    mult = complexity.drop_state_time(mdp, pi, rho_star) + 1.0
    fp = sup_norm(TV - V)
    value_gap = sup_norm(V - rho_star / (1.0 - gamma))
    lhs = suboptimality(mdp, pi, rho_star)
    tail = 2.0 * (1.0 - gamma) / gamma + 2.0 * eps_greedy / gamma
    checks = [
        BoundCheck(
            "reduction (raw form)",
            lhs,
            mult * (7.0 * (1.0 - gamma) * value_gap + (2.0 - gamma) / gamma * fp + tail),
        ),
        BoundCheck(
            "reduction (joint-solution form)",
            lhs,
            mult * (7.0 * (1.0 - gamma) * M + (2.0 + 6.0 * gamma) / gamma * fp + tail),
        ),
    ]
    if gamma >= 0.5:
        checks.append(
            BoundCheck(
                "reduction (gamma >= 1/2 form)",
                lhs,
                mult * ((1.0 - gamma) * (4.0 + 7.0 * M) + 16.0 * fp + 4.0 * eps_greedy),
            )
        )
    return checks


# --------------------------------------------------------------------------
# end-to-end checks used by the solvers


def alg1_poly(n: int) -> float:
    return 13.0 + 35.0 / n + 20.0 / n**2


def multichain_check(mdp: Mdp, pi, gt: oracle.GroundTruth, n: int, extra_k: float = 0.0, tdrop=None):
    if tdrop is None:
        tdrop = complexity.tdrop(mdp, gt.rho_star)
    M = complexity_m(gt, tdrop)
    const = 71.0 if extra_k == 0 else 7.0 + 64.0 * math.exp(-extra_k)
    rhs = (tdrop + 1.0) * (const * M + 2.0) / (n - 1)
    lhs = float(np.max(gt.rho_star - chain.gain(mdp, pi)))
    label = "multichain solver" if extra_k == 0 else f"multichain solver, extra_k={extra_k:g}"
    return BoundCheck(label, lhs, rhs, n=n, detail={"M": M, "tdrop": tdrop})


def baseline_check(mdp: Mdp, pi, gt: oracle.GroundTruth, n: int, b=None):
    if b is None:
        _, b = complexity.transient_time_bound(mdp)
    rhs = 2.0 * (3.0 * b + 3.0 * span(gt.h_unmod) + 2.0) * math.log(n) / n
    return BoundCheck("discounted baseline", suboptimality(mdp, pi, gt.rho_star), rhs, n=n,
                      detail={"B": b, "log": "natural"})


def warm_start_factor(gamma: float) -> float:
    """Leading constant of the warm-start fixed-point bound.

    With an integer horizon the warm start lands within 2M of V*_gamma and
    the Picard phase contracts at 4(1-gamma) per unit, giving 8e/gamma;
    otherwise only 2M/gamma is available and the constant doubles.
    """
    h = 1.0 / (1.0 - gamma)
    integral = abs(h - round(h)) <= 1e-9 * max(1.0, h)
    return (8.0 if integral else 16.0) * math.e / gamma


# --------------------------------------------------------------------------
# the suite


@dataclass
class SuiteConfig:
    n_grid: tuple = (1, 2, 5, 10, 50, 200)
    alg2_gammas: tuple = (0.5, 0.9, 0.99)
    warm_gammas: tuple = (0.9, 0.99)
    extra_k: float = 4.0
    reference: object = None
    enumeration_cap: int = 10**5
    baseline: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> SuiteConfig:
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        for key in ("n_grid", "alg2_gammas", "warm_gammas"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass
class SuiteResult:
    checks: list
    context: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "context": self.context, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        rows = [f"{'check':<40} {'n':>6} {'lhs':>12} {'rhs':>12} {'ratio':>8}  ok"]
        for c in self.checks:
            ratio = "-" if c.ratio is None else f"{c.ratio:.3f}"
            n = "-" if c.n is None else str(c.n)
            rows.append(f"{c.label:<40} {n:>6} {c.lhs:12.4e} {c.rhs:12.4e} {ratio:>8}  {'PASS' if c.passed else 'FAIL'}")
        return "\n".join(rows)


def _alg1_checks(mdp, gt, tdrop, n_grid):
    out = []
    h0 = np.zeros(mdp.n_states)
    dist = sup_norm(h0 - gt.h_both)
    rbar = complexity.gain_dropping_reward(mdp, gt.rho_star)
    for n in n_grid:
        if n < 1:
            continue
        rep = solvers.approx_shifted_halpern(mdp, h0, n)
        z, pi, rho_hat = rep.output_value, rep.output_policy, rep.trace.gain_estimate
        sub = suboptimality(mdp, pi, gt.rho_star)
        out.append(BoundCheck("alg1 fixed-point error", residual_average(mdp, z, gt.rho_star),
                              alg1_poly(n) / n * dist, n=n))
        out.append(BoundCheck("alg1 suboptimality", sub, (10.0 / 3.0 * tdrop + alg1_poly(n)) / n * dist, n=n))
        out.append(BoundCheck("gain estimate", sup_norm(rho_hat - gt.rho_star), 2.0 * dist / n, n=n))
        if not math.isinf(gt.delta) and n >= 4.0 * dist / gt.delta:
            out.append(BoundCheck("alg1 large-n suboptimality", sub, alg1_poly(n) / n * dist, n=n))
            drops = float(pi.project(mdp, rbar).sum())
            gp = sup_norm(mdp.P[pi.flat_index(mdp)] @ gt.rho_star - gt.rho_star)
            out.append(BoundCheck("alg1 large-n dropping actions", drops, 0.0, n=n, tol=0.0))
            out.append(BoundCheck("alg1 large-n gain preservation", gp, 0.0, n=n, tol=EXACT_TOL))
    return out


def _picard_checks(mdp, gt, tdrop, n_grid):
    out = []
    h0 = np.zeros(mdp.n_states)
    dist = sup_norm(h0 - gt.h_both)
    s = span(gt.h_unmod)
    top = max(n_grid)
    rep = solvers.picard(solvers.bellman_operator(mdp), h0, top, keep="full")
    for n in n_grid:
        if n < 1:
            continue
        x = rep.trace.iterates[n]
        out.append(BoundCheck("picard gain tracking", sup_norm(x - n * gt.rho_star - gt.h_both), dist, n=n))
        err = sup_norm(x - n * gt.rho_star)
        out.append(BoundCheck("picard from zero (joint solution)", err, span(gt.h_both), n=n))
        out.append(BoundCheck("picard from zero (drop-time form)", err, s + tdrop + s * tdrop, n=n))
    return out


def _alg2_checks(mdp, gammas, n_grid):
    out = []
    top = max(n_grid)
    for gamma in gammas:
        v_star, _ = oracle.discounted_optimal(mdp, gamma)
        x0 = np.zeros(mdp.n_states)
        dist = sup_norm(x0 - v_star)
        rep = solvers.halpern_then_picard(solvers.bellman_operator(mdp, gamma), x0, top)
        E = rep.meta["E"]
        for t in n_grid:
            res = rep.trace.residual_seq[t]
            bound = 8.0 * math.e * gamma**t / horizon_sum(gamma, t) * dist
            out.append(BoundCheck(f"halpern-then-picard gamma={gamma:g}", res, bound, n=t))
            if t <= E:
                out.append(BoundCheck(f"halpern phase gamma={gamma:g}", res, 4.0 / (t + 1) * dist, n=t))
    return out


def warm_start_lemma_check(mdp, gt, tdrop, gamma) -> BoundCheck:
    """Worst t in 1..floor(1/(1-gamma)) of the rescaled undiscounted warm start."""
    M = complexity_m(gt, tdrop)
    v_star, _ = oracle.discounted_optimal(mdp, gamma)
    horizon = solvers.effective_horizon(gamma)
    x = np.zeros(mdp.n_states)
    worst = None
    for t in range(1, horizon + 1):
        x = apply_optimality(mdp, x)
        scale = t * (1.0 - gamma)
        c = BoundCheck(f"warm-start value error gamma={gamma:g}", sup_norm(x / scale - v_star), 2.0 * M / scale, n=t)
        if worst is None or c.margin < worst.margin:
            worst = c
    return worst


def _warm_checks(mdp, gt, tdrop, gammas):
    out = []
    M = complexity_m(gt, tdrop)
    for gamma in gammas:
        out.append(warm_start_lemma_check(mdp, gt, tdrop, gamma))
        v_star, _ = oracle.discounted_optimal(mdp, gamma)
        out.append(BoundCheck(f"gain approximation gamma={gamma:g}",
                              sup_norm(v_star - gt.rho_star / (1.0 - gamma)), M))
    return out


def _multichain_checks(mdp, gt, tdrop, n_grid, extra_k):
    out = []
    M = complexity_m(gt, tdrop)
    for n in n_grid:
        if n < 2:
            continue
        gamma = 1.0 - 1.0 / n
        rep = solvers.solve_multichain(mdp, n)
        m = rep.meta["budget"] - rep.meta["E_prime"]
        res = residual_discounted(mdp, rep.output_value, gamma)
        bound = warm_start_factor(gamma) * gamma**m / horizon_sum(gamma, m) * M
        out.append(BoundCheck("warm-start halpern-then-picard", res, bound, n=n))
        out.append(multichain_check(mdp, rep.output_policy, gt, n, 0.0, tdrop))
        if extra_k and float(extra_k * n).is_integer():
            rep_k = solvers.solve_multichain(mdp, n, extra_k=extra_k)
            out.append(multichain_check(mdp, rep_k.output_policy, gt, n, extra_k, tdrop))
    return out


def _baseline_checks(mdp, gt, n_grid, cap):
    if policy_count(mdp) > cap:
        return []
    _, b = complexity.transient_time_bound(mdp, cap)
    out = []
    for n in n_grid:
        if n >= 4:
            rep = solvers.dmdp_baseline(mdp, n)
            out.append(baseline_check(mdp, rep.output_policy, gt, n, b))
    return out


def theorem_suite(mdp: Mdp, config: SuiteConfig | None = None, gt=None) -> SuiteResult:
    """Run every algorithm over the configured grid and compare with its bound."""
    config = config or SuiteConfig()
    if gt is None:
        gt = oracle.ground_truth(mdp, reference=config.reference)
    tdrop = complexity.tdrop(mdp, gt.rho_star)
    grid = tuple(sorted(set(int(n) for n in config.n_grid)))
    checks = []
    checks += _alg1_checks(mdp, gt, tdrop, grid)
    checks += _picard_checks(mdp, gt, tdrop, grid)
    checks += _alg2_checks(mdp, config.alg2_gammas, grid)
    checks += _warm_checks(mdp, gt, tdrop, config.warm_gammas)
    checks += _multichain_checks(mdp, gt, tdrop, grid, config.extra_k)
    if config.baseline:
        checks += _baseline_checks(mdp, gt, grid, config.enumeration_cap)
    context = {
        "instance": mdp.name,
        "tdrop": tdrop,
        "M": complexity_m(gt, tdrop),
        "delta": None if math.isinf(gt.delta) else gt.delta,
        "h0_distance": sup_norm(gt.h_both),
        "n_grid": list(grid),
    }
    return SuiteResult(checks, context)
