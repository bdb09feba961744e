"""Discounted and average-reward Bellman operators.

``gamma = 1`` gives the undiscounted operator T. All operators share one
state-action backup (:func:`q_values`), so greedy selection and policy
evaluation see bit-identical numbers.
"""
from __future__ import annotations

import numpy as np

from .errors import GammaOutOfRange
from .mdp import Mdp, Policy, as_policy, check_length, sup_dist, sup_norm


def _check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise GammaOutOfRange(f"discount factor {gamma} outside (0, 1]")


def q_values(mdp: Mdp, V, gamma=1.0) -> np.ndarray:
    """r(s,a) + gamma * P_sa V over the flat action rows."""
    _check_gamma(gamma)
    V = check_length(V, mdp)
    return mdp.r + gamma * (mdp.P @ V)


def _padded(mdp, q):
    idx = mdp.pad_index
    return np.where(idx >= 0, q[idx], -np.inf)


def state_max(mdp: Mdp, q) -> np.ndarray:
    """Per-state maximum of a flat state-action vector."""
    return _padded(mdp, np.asarray(q, dtype=float)).max(axis=1)


def state_argmax(mdp: Mdp, q) -> np.ndarray:
    """Per-state maximizing local action index, first one on ties."""
    return _padded(mdp, np.asarray(q, dtype=float)).argmax(axis=1)


def apply_optimality(mdp: Mdp, V, gamma=1.0) -> np.ndarray:
    return state_max(mdp, q_values(mdp, V, gamma))


def apply_evaluation(mdp: Mdp, pi, V, gamma=1.0) -> np.ndarray:
    return as_policy(pi).project(mdp, q_values(mdp, V, gamma))


def greedy(mdp: Mdp, V, gamma=1.0) -> Policy:
    return Policy.deterministic(state_argmax(mdp, q_values(mdp, V, gamma)))


def residual_discounted(mdp: Mdp, V, gamma) -> float:
    """||T_gamma(V) - V||_inf for gamma < 1."""
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(f"discounted residual needs gamma in (0, 1), got {gamma}")
    return sup_dist(apply_optimality(mdp, V, gamma), V)


def residual_average(mdp: Mdp, V, rho_star) -> float:
    """||T(V) - V - rho*||_inf."""
    V = check_length(V, mdp)
    rho_star = check_length(rho_star, mdp)
    return sup_norm(apply_optimality(mdp, V, 1.0) - V - rho_star)
