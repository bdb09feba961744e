"""Complexity parameters: gain gap, gain-dropping times and transient times.

A pair (s, a) is *gain-dropping* when rho*(s) - P_sa rho* exceeds
``tol_gap = 1e-9 * max(1, ||rho*||)``. The strict inequality is only
meaningful up to the accuracy of rho*, and a misclassified pair silently
changes T_drop, so every function here routes through :func:`gain_gaps`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chain
from .bellman import state_max
from .errors import EnumerationTooLarge, NonconvergenceSuspected
from .mdp import Mdp, as_policy, check_length, enumerate_policies, policy_count, sup_norm

INF = math.inf
DEFAULT_CAP = 10**7


def tol_gap(rho_star) -> float:
    return 1e-9 * max(1.0, sup_norm(rho_star))


def gain_gaps(mdp: Mdp, rho_star) -> np.ndarray:
    """rho*(s) - P_sa rho* for every flat action row."""
    rho_star = check_length(rho_star, mdp)
    return rho_star[mdp.state_of] - mdp.P @ rho_star


def min_gain_gap(mdp: Mdp, rho_star) -> float:
    gaps = gain_gaps(mdp, rho_star)
    positive = gaps[gaps > tol_gap(rho_star)]
    return float(positive.min()) if positive.size else INF


def gain_dropping_reward(mdp: Mdp, rho_star) -> np.ndarray:
    """Indicator of gain-dropping pairs over the flat action rows."""
    return (gain_gaps(mdp, rho_star) > tol_gap(rho_star)).astype(float)


def tdrop_policy(mdp: Mdp, pi, rho_star, analysis=None) -> float:
    """Worst-case expected number of gain-dropping actions taken by ``pi``."""
    pi = as_policy(pi)
    if analysis is None:
        analysis = chain.analyze(mdp, pi)
    rbar_pi = pi.project(mdp, gain_dropping_reward(mdp, rho_star))
    return float(max((analysis.H @ rbar_pi).max(), 0.0))


def drop_state_time(mdp: Mdp, pi, rho_star, analysis=None) -> float:
    """Worst-case expected time in states where ``P_pi rho* < rho*``.

    Equals :func:`tdrop_policy` for deterministic policies; for randomized
    ones it is the count the sensitivity bound actually controls.
    """
    pi = as_policy(pi)
    if analysis is None:
        analysis = chain.analyze(mdp, pi)
    rho_star = check_length(rho_star, mdp)
    drop = (rho_star - analysis.P_pi @ rho_star) > tol_gap(rho_star)
    return float(max((analysis.H @ drop.astype(float)).max(), 0.0))


def tdrop_values(mdp: Mdp, rho_star, tol=1e-12, max_sweeps=10**6) -> np.ndarray:
    """Optimal expected total gain-dropping reward from each start state.

    Monotone value iteration from zero; the iterates increase to the limit.
    """
    rbar = gain_dropping_reward(mdp, rho_star)
    x = np.zeros(mdp.n_states)
    if not rbar.any():
        return x
    change = INF
    for _ in range(max_sweeps):
        x_next = state_max(mdp, rbar + mdp.P @ x)
        change = float(np.max(np.abs(x_next - x)))
        x = x_next
        if change < tol:
            return x
    if change > 1e-9:
        raise NonconvergenceSuspected(
            f"gain-dropping value iteration still moving by {change:.3e} after {max_sweeps} sweeps; "
            "a recurrent pair is probably misclassified as gain-dropping"
        )
    return x


def tdrop(mdp: Mdp, rho_star, **kwargs) -> float:
    return float(tdrop_values(mdp, rho_star, **kwargs).max())


def tdrop_enumerated(mdp: Mdp, rho_star, cap=DEFAULT_CAP) -> float:
    """Cross-check of :func:`tdrop` by maximizing over deterministic policies."""
    size = policy_count(mdp)
    if size > cap:
        raise EnumerationTooLarge(size, cap)
    return max(tdrop_policy(mdp, pi, rho_star) for pi in enumerate_policies(mdp))


def transient_time_bound(mdp: Mdp, cap=DEFAULT_CAP) -> tuple[dict, float]:
    """``({actions: B^pi}, B)`` over all deterministic policies."""
    size = policy_count(mdp)
    if size > cap:
        raise EnumerationTooLarge(size, cap)
    b_pi = {pi.actions: chain.transient_time(mdp, pi) for pi in enumerate_policies(mdp)}
    return b_pi, max(b_pi.values())


@dataclass
class ComplexityReport:
    delta: float
    tdrop: float
    rbar: np.ndarray
    tdrop_pi: dict = field(default_factory=dict)
    b_pi: dict = field(default_factory=dict)
    b: float | None = None

    def to_dict(self) -> dict:
        def key(acts):
            return ",".join(map(str, acts))

        return {
            "delta": None if math.isinf(self.delta) else self.delta,
            "delta_is_infinite": math.isinf(self.delta),
            "tdrop": self.tdrop,
            "rbar": self.rbar.tolist(),
            "tdrop_pi": {key(k): v for k, v in self.tdrop_pi.items()},
            "b_pi": {key(k): v for k, v in self.b_pi.items()},
            "b": self.b,
        }


def complexity_report(mdp: Mdp, rho_star, enumerate_all=False, cap=DEFAULT_CAP) -> ComplexityReport:
    report = ComplexityReport(
        delta=min_gain_gap(mdp, rho_star),
        tdrop=tdrop(mdp, rho_star),
        rbar=gain_dropping_reward(mdp, rho_star),
    )
    if enumerate_all:
        size = policy_count(mdp)
        if size > cap:
            raise EnumerationTooLarge(size, cap)
        for pi in enumerate_policies(mdp):
            analysis = chain.analyze(mdp, pi)
            report.tdrop_pi[pi.actions] = tdrop_policy(mdp, pi, rho_star, analysis)
            report.b_pi[pi.actions] = analysis.transient_time
        report.b = max(report.b_pi.values())
    return report
