"""Ground truth for the multichain theory: rho*, V*_gamma, reference policies
and solutions of the modified and unmodified optimality equations.

rho* is found by exhaustive enumeration of deterministic policies. For large
structured instances a known optimal policy can be passed instead; its gain
and bias are then certified through the unmodified equations, whose
solutions always carry the optimal gain.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import chain, complexity
from .bellman import q_values, residual_discounted, state_max
from .errors import DegenerateDelta, EnumerationTooLarge, GammaOutOfRange, NoReferenceFound
from .mdp import (
    Mdp,
    Policy,
    as_policy,
    check_length,
    enumerate_policies,
    policy_count,
    span,
    sup_dist,
    sup_norm,
)

CHECK_TOL = 1e-8
GAIN_TOL = 1e-9
DEFAULT_ALPHAS = (-3.0, 0.0, 1.0, 5.0, 100.0)
CHUNK = 4096


def tol_eq(rho) -> float:
    return 1e-9 * max(1.0, sup_norm(rho))


# --------------------------------------------------------------------------
# optimal gain by enumeration


def _gains_chunk(mdp, start, stop):
    counts = [range(int(c)) for c in mdp.action_counts]
    acts = list(itertools.islice(itertools.product(*counts), start, stop))
    return acts, [chain.gain(mdp, a) for a in acts]


def _chunks(total, size):
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def optimal_gain_bruteforce(mdp: Mdp, cap=complexity.DEFAULT_CAP, workers=None):
    """``(rho_star, gain_optimal_policies)`` by scanning every deterministic policy.

    The returned policies are those whose gain matches ``rho_star`` within
    ``GAIN_TOL`` in every state, in enumeration order. ``workers > 1`` fans
    fixed chunks out to processes; the reduction runs in chunk order, so the
    result does not depend on the worker count.
    """
    size = policy_count(mdp)
    if size > cap:
        raise EnumerationTooLarge(size, cap)
    spans = _chunks(size, CHUNK)
    if workers and workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_gains_chunk, itertools.repeat(mdp), *zip(*spans)))
    else:
        results = (_gains_chunk(mdp, lo, hi) for lo, hi in spans)

    rho = np.full(mdp.n_states, -np.inf)
    candidates = []
    for acts, gains in results:
        for a, g in zip(acts, gains):
            raised = np.any(g > rho + GAIN_TOL)
            rho = np.maximum(rho, g)
            if raised:
                candidates = [(b, h) for b, h in candidates if np.all(h >= rho - GAIN_TOL)]
            if np.all(g >= rho - GAIN_TOL):
                candidates.append((a, g))
    optimal = [Policy(actions=a) for a, g in candidates if np.all(g >= rho - GAIN_TOL)]
    return rho, optimal


# --------------------------------------------------------------------------
# discounted optimum


def discounted_optimal(mdp: Mdp, gamma, max_iter=10_000):
    """Exact policy iteration for ``V*_gamma``; ties keep the incumbent action."""
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(f"discounted optimum needs gamma in (0, 1), got {gamma}")
    n = mdp.n_states
    idx = mdp.pad_index
    acts = np.zeros(n, dtype=np.int64)
    V = np.zeros(n)
    for _ in range(max_iter):
        P_pi, r_pi = Policy.deterministic(acts).matrices(mdp)
        V = chain.lu_solve(np.eye(n) - gamma * P_pi, r_pi, "discounted evaluation")
        q = q_values(mdp, V, gamma)
        padded = np.where(idx >= 0, q[idx], -np.inf)
        best = padded.argmax(axis=1)
        current = padded[np.arange(n), acts]
        slack = 1e-12 * max(1.0, sup_norm(V))
        improve = padded[np.arange(n), best] > current + slack
        if not improve.any():
            break
        acts = np.where(improve, best, acts)
    # a few contraction steps mop up the last ulps of the linear solve
    tol = 1e-10 / (1.0 - gamma)
    for _ in range(100):
        if residual_discounted(mdp, V, gamma) <= tol:
            break
        V = state_max(mdp, q_values(mdp, V, gamma))
    return V, Policy.deterministic(acts)


# --------------------------------------------------------------------------
# optimality-equation checkers


@dataclass
class EquationCheck:
    passed: bool
    slack: np.ndarray
    gain_slack: np.ndarray
    bias_slack: np.ndarray

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "slack": self.slack.tolist(),
            "gain_slack": self.gain_slack.tolist(),
            "bias_slack": self.bias_slack.tolist(),
        }


def _gain_part(mdp, rho):
    prho = mdp.P @ rho
    return prho, np.abs(state_max(mdp, prho) - rho)


def _result(gain_slack, bias_slack, tol):
    slack = np.maximum(gain_slack, bias_slack)
    return EquationCheck(bool(np.all(slack <= tol)), slack, gain_slack, bias_slack)


def check_unmodified(mdp: Mdp, rho, h, tol=CHECK_TOL) -> EquationCheck:
    """max_a P_sa rho = rho(s), and the bias equation over gain-preserving actions."""
    rho = check_length(rho, mdp)
    h = check_length(h, mdp)
    prho, gain_slack = _gain_part(mdp, rho)
    keep = np.abs(prho - rho[mdp.state_of]) <= tol_eq(rho)
    q = np.where(keep, q_values(mdp, h), -np.inf)
    restricted = state_max(mdp, q)
    bias_slack = np.abs(restricted - rho - h)
    bias_slack[~np.isfinite(restricted)] = np.inf
    return _result(gain_slack, bias_slack, tol)


def check_modified(mdp: Mdp, rho, h, tol=CHECK_TOL) -> EquationCheck:
    """M(P rho) = rho and T(h) = rho + h."""
    rho = check_length(rho, mdp)
    h = check_length(h, mdp)
    _, gain_slack = _gain_part(mdp, rho)
    bias_slack = np.abs(state_max(mdp, q_values(mdp, h)) - rho - h)
    return _result(gain_slack, bias_slack, tol)


def simultaneous_argmax(mdp: Mdp, rho, h, tol=CHECK_TOL) -> Policy | None:
    """A deterministic policy attaining both maxima in every state, if any."""
    rho = check_length(rho, mdp)
    h = check_length(h, mdp)
    prho = mdp.P @ rho
    q = q_values(mdp, h)
    best_g = state_max(mdp, prho)
    best_q = state_max(mdp, q)
    ok = (np.abs(prho - best_g[mdp.state_of]) <= tol) & (np.abs(q - best_q[mdp.state_of]) <= tol)
    acts = []
    for s in range(mdp.n_states):
        hits = np.flatnonzero(ok[mdp.offsets[s] : mdp.offsets[s + 1]])
        if hits.size == 0:
            return None
        acts.append(int(hits[0]))
    return Policy.deterministic(acts)


@dataclass
class CommutativityCheck:
    passed: bool
    errors: dict

    def to_dict(self) -> dict:
        return {"passed": self.passed, "errors": {str(k): v for k, v in self.errors.items()}}


def check_restricted_commutativity(mdp: Mdp, rho_star, h, alphas=DEFAULT_ALPHAS, tol=CHECK_TOL):
    """Checks T(h + alpha rho*) = h + (alpha + 1) rho* for each alpha."""
    rho_star = check_length(rho_star, mdp)
    h = check_length(h, mdp)
    errors = {}
    for alpha in alphas:
        lhs = state_max(mdp, q_values(mdp, h + alpha * rho_star))
        errors[float(alpha)] = sup_dist(lhs, h + (alpha + 1.0) * rho_star)
    return CommutativityCheck(all(e <= tol for e in errors.values()), errors)


# --------------------------------------------------------------------------
# reference policy and joint solution


def blackwell_reference(mdp: Mdp, rho_star, candidates=None, cap=complexity.DEFAULT_CAP):
    """First gain-optimal policy whose bias solves the unmodified equations.

    ``candidates`` defaults to every deterministic policy in enumeration order.
    """
    rho_star = check_length(rho_star, mdp)
    if candidates is None:
        size = policy_count(mdp)
        if size > cap:
            raise EnumerationTooLarge(size, cap)
        candidates = enumerate_policies(mdp)
    worst = {}
    for pi in candidates:
        analysis = chain.analyze(mdp, pi)
        if sup_dist(analysis.gain, rho_star) > GAIN_TOL:
            continue
        check = check_unmodified(mdp, rho_star, analysis.bias)
        if check.passed:
            return pi, analysis.bias
        worst[",".join(map(str, pi.actions))] = float(check.slack.max())
    raise NoReferenceFound(worst or "no policy attains rho*")


def construct_h_both(mdp: Mdp, rho_star, h_unmod, delta) -> np.ndarray:
    """Shift h_unmod along rho* far enough to also solve the modified equations."""
    h_unmod = check_length(h_unmod, mdp)
    rho_star = check_length(rho_star, mdp)
    if math.isinf(delta):
        return h_unmod.copy()
    if not delta > 0.0:
        raise DegenerateDelta(f"gain gap {delta!r} is not positive")
    return h_unmod + ((span(h_unmod) + 1.0) / delta) * rho_star


@dataclass
class GroundTruth:
    rho_star: np.ndarray
    blackwell_policy: Policy
    h_unmod: np.ndarray
    h_both: np.ndarray
    delta: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rho_star": self.rho_star.tolist(),
            "blackwell_policy": self.blackwell_policy.to_dict(),
            "h_unmod": self.h_unmod.tolist(),
            "h_both": self.h_both.tolist(),
            "delta": None if math.isinf(self.delta) else self.delta,
            "delta_is_infinite": math.isinf(self.delta),
            "provenance": self.provenance,
        }


def ground_truth(mdp: Mdp, reference=None, cap=complexity.DEFAULT_CAP, workers=None) -> GroundTruth:
    """Assemble and self-check the ground truth for ``mdp``.

    With ``reference`` given, its gain is taken as rho* once (gain, bias)
    passes the unmodified equations; no enumeration happens.
    """
    provenance = {"tol_eq_scale": 1e-9, "check_tol": CHECK_TOL, "gain_tol": GAIN_TOL}
    if reference is not None:
        pi = as_policy(reference)
        analysis = chain.analyze(mdp, pi)
        rho_star, h_unmod = analysis.gain, analysis.bias
        check = check_unmodified(mdp, rho_star, h_unmod)
        if not check.passed:
            raise NoReferenceFound({"reference": list(pi.actions), "slack": float(check.slack.max())})
        provenance["method"] = "reference-policy"
    else:
        rho_star, optimal = optimal_gain_bruteforce(mdp, cap=cap, workers=workers)
        pi, h_unmod = blackwell_reference(mdp, rho_star, candidates=optimal)
        provenance["method"] = "enumeration"
        provenance["policies_enumerated"] = policy_count(mdp)
        provenance["gain_optimal_policies"] = len(optimal)
    delta = complexity.min_gain_gap(mdp, rho_star)
    h_both = construct_h_both(mdp, rho_star, h_unmod, delta)
    check = check_modified(mdp, rho_star, h_both)
    if not check.passed:
        raise DegenerateDelta(f"shifted bias misses the modified equations by {check.slack.max():.3e}")
    return GroundTruth(rho_star, pi, h_unmod, h_both, delta, provenance)
