"""Exact analysis of the Markov chain induced by a fixed policy.

Recurrent classes are the closed strongly connected components of the
support digraph (edge iff P[s, s'] > 0). The limiting matrix is assembled
from per-class stationary distributions and absorption probabilities, and
the deviation matrix comes from ``H = (I - P + P_inf)^{-1} - P_inf``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NotTransient, SingularSystem
from .mdp import Mdp, as_policy

PIVOT_TOL = 1e-13


def lu_solve(A, b, what="linear system"):
    """Dense LU solve with partial pivoting, rejecting tiny pivots."""
    A = np.asarray(A, dtype=float)
    scale = max(np.abs(A).sum(axis=1).max(), 1.0) if A.size else 1.0
    with warnings.catch_warnings():
        # the pivot test below reports singularity with more context
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(A, check_finite=False)
    if A.size and np.min(np.abs(np.diag(lu))) < PIVOT_TOL * scale:
        raise SingularSystem(f"{what} is numerically singular", np.linalg.cond(A))
    return linalg.lu_solve((lu, piv), b, check_finite=False)


def recurrent_structure(P) -> tuple[list[np.ndarray], np.ndarray]:
    """Closed classes (sorted by smallest state) and the sorted transient states."""
    P = np.asarray(P)
    n = P.shape[0]
    support = P > 0.0
    ncomp, labels = connected_components(csr_matrix(support), directed=True, connection="strong")
    closed = np.ones(ncomp, dtype=bool)
    rows, cols = np.nonzero(support)
    leaving = labels[rows] != labels[cols]
    closed[labels[rows[leaving]]] = False
    classes = [np.flatnonzero(labels == c) for c in range(ncomp) if closed[c]]
    classes.sort(key=lambda c: c[0])
    recurrent = np.zeros(n, dtype=bool)
    for c in classes:
        recurrent[c] = True
    return classes, np.flatnonzero(~recurrent)


def stationary(P_class) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic block."""
    k = P_class.shape[0]
    A = P_class.T - np.eye(k)
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    return lu_solve(A, b, "stationary distribution system")


def limiting_matrix(P, structure=None) -> np.ndarray:
    """Cesaro limit of the powers of a stochastic matrix."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    classes, transient = structure if structure is not None else recurrent_structure(P)
    P_inf = np.zeros((n, n))
    dists = []
    for c in classes:
        mu = stationary(P[np.ix_(c, c)])
        dists.append(mu)
        P_inf[np.ix_(c, c)] = mu[None, :]
    if transient.size:
        Q = P[np.ix_(transient, transient)]
        B = np.column_stack([P[np.ix_(transient, c)].sum(axis=1) for c in classes])
        absorb = lu_solve(np.eye(transient.size) - Q, B, "absorption system")
        for j, (c, mu) in enumerate(zip(classes, dists)):
            P_inf[np.ix_(transient, c)] = absorb[:, j : j + 1] * mu[None, :]
    return P_inf


def deviation_matrix(P, P_inf) -> np.ndarray:
    n = P.shape[0]
    eye = np.eye(n)
    Z = lu_solve(eye - P + P_inf, eye, "fundamental matrix")
    return Z - P_inf


def hitting_times(P, transient) -> np.ndarray:
    """Expected steps spent in ``transient`` before reaching the recurrent set."""
    x = np.zeros(P.shape[0])
    if transient.size:
        Q = P[np.ix_(transient, transient)]
        x[transient] = lu_solve(np.eye(transient.size) - Q, np.ones(transient.size), "hitting-time system")
    return x


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    P_pi: np.ndarray
    r_pi: np.ndarray
    recurrent_classes: list
    transient_states: np.ndarray
    P_inf: np.ndarray
    H: np.ndarray
    gain: np.ndarray
    bias: np.ndarray
    transient_time: float

    def to_dict(self) -> dict:
        return {
            "P_pi": self.P_pi.tolist(),
            "r_pi": self.r_pi.tolist(),
            "recurrent_classes": [c.tolist() for c in self.recurrent_classes],
            "transient_states": self.transient_states.tolist(),
            "P_inf": self.P_inf.tolist(),
            "H": self.H.tolist(),
            "gain": self.gain.tolist(),
            "bias": self.bias.tolist(),
            "transient_time": self.transient_time,
        }


def analyze_matrix(P_pi, r_pi) -> ChainAnalysis:
    P_pi = np.asarray(P_pi, dtype=float)
    r_pi = np.asarray(r_pi, dtype=float)
    classes, transient = recurrent_structure(P_pi)
    P_inf = limiting_matrix(P_pi, (classes, transient))
    H = deviation_matrix(P_pi, P_inf)
    times = hitting_times(P_pi, transient)
    return ChainAnalysis(
        P_pi=P_pi,
        r_pi=r_pi,
        recurrent_classes=classes,
        transient_states=transient,
        P_inf=P_inf,
        H=H,
        gain=P_inf @ r_pi,
        bias=H @ r_pi,
        transient_time=float(times.max()),
    )


def analyze(mdp: Mdp, pi) -> ChainAnalysis:
    P_pi, r_pi = as_policy(pi).matrices(mdp)
    return analyze_matrix(P_pi, r_pi)


def gain(mdp: Mdp, pi) -> np.ndarray:
    """rho^pi without forming the deviation matrix."""
    P_pi, r_pi = as_policy(pi).matrices(mdp)
    return limiting_matrix(P_pi) @ r_pi


def transient_time(mdp: Mdp, pi) -> float:
    """B^pi: worst-case expected time before hitting the recurrent set."""
    P_pi, _ = as_policy(pi).matrices(mdp)
    _, transient = recurrent_structure(P_pi)
    return float(hitting_times(P_pi, transient).max())


def expected_visits(analysis: ChainAnalysis, s, s_to) -> float:
    if s_to not in set(analysis.transient_states.tolist()):
        raise NotTransient(s_to)
    return float(analysis.H[s, s_to])
