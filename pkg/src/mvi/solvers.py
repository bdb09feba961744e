"""Picard, Halpern and the composite value-iteration schemes built from them.

Every routine records one residual per iterate, so a run of ``n`` steps
leaves ``n + 1`` residuals. Which residual is recorded depends on the
scheme; see each docstring.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import chain
from .bellman import apply_evaluation, apply_optimality, greedy
from .errors import ConfigError, GammaOutOfRange, IterationBudgetTooSmall, MissingContraction
from .mdp import Mdp, Policy, as_policy, check_length, sup_dist, sup_norm

KEEP_MODES = ("none", "residuals", "full")
SCHEDULES = ("anchor_two", "anchor_one")


# --------------------------------------------------------------------------
# plumbing


@dataclass
class OperatorHandle:
    """A map on R^dim, optionally declared ``contraction``-Lipschitz in sup-norm."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    contraction: float | None = None
    label: str = "op"
    spot_checks: int = 8

    def __post_init__(self):
        if self.contraction is not None:
            if not 0.0 < self.contraction <= 1.0:
                raise GammaOutOfRange(f"contraction factor {self.contraction} outside (0, 1]")
            self._spot_check()

    def _spot_check(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(self.spot_checks):
            x, y = rng.normal(size=(2, self.dim)) * 10.0
            gap = sup_dist(self.apply(x), self.apply(y)) - self.contraction * sup_dist(x, y)
            worst = max(worst, gap)
        if worst > 1e-9 * max(1.0, self.dim):
            warnings.warn(
                f"{self.label}: declared {self.contraction}-Lipschitz but a random pair exceeds it by {worst:.3e}",
                RuntimeWarning,
                stacklevel=3,
            )

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)


def bellman_operator(mdp: Mdp, gamma=1.0, shift=None) -> OperatorHandle:
    """T_gamma, or T_gamma - shift."""
    if shift is None:
        apply = lambda V: apply_optimality(mdp, V, gamma)  # noqa: E731
        label = "T" if gamma == 1.0 else f"T_{gamma}"
    else:
        shift = check_length(shift, mdp)
        apply = lambda V: apply_optimality(mdp, V, gamma) - shift  # noqa: E731
        label = "T - shift"
    return OperatorHandle(mdp.n_states, apply, contraction=gamma, label=label)


def evaluation_operator(mdp: Mdp, pi, gamma=1.0, shift=None) -> OperatorHandle:
    pi = as_policy(pi)
    if shift is None:
        apply = lambda V: apply_evaluation(mdp, pi, V, gamma)  # noqa: E731
    else:
        shift = check_length(shift, mdp)
        apply = lambda V: apply_evaluation(mdp, pi, V, gamma) - shift  # noqa: E731
    return OperatorHandle(mdp.n_states, apply, contraction=gamma, label="T^pi")


@dataclass
class IterTrace:
    keep: str = "residuals"
    residual_seq: list = field(default_factory=list)
    iterates: list | None = None
    gain_estimate: np.ndarray | None = None
    wallclock: float = 0.0
    schedule: str = ""

    def __post_init__(self):
        if self.keep not in KEEP_MODES:
            raise ConfigError(f"unknown trace mode {self.keep!r}; expected one of {KEEP_MODES}")
        if self.keep == "full" and self.iterates is None:
            self.iterates = []

    def record(self, x, residual):
        if self.keep != "none":
            self.residual_seq.append(float(residual))
        if self.keep == "full":
            self.iterates.append(np.array(x))

    def close(self, x, residual):
        """Record the last iterate; ``keep='none'`` stores only this residual."""
        if self.keep == "none":
            self.residual_seq = [float(residual)]
        else:
            self.record(x, residual)

    def extend(self, other: IterTrace, drop_last=False):
        res = other.residual_seq[:-1] if drop_last else other.residual_seq
        its = other.iterates[:-1] if (drop_last and other.iterates) else other.iterates
        if self.keep != "none":
            self.residual_seq.extend(res)
        if self.keep == "full":
            self.iterates.extend(its)

    def to_dict(self) -> dict:
        out = {
            "keep": self.keep,
            "residual_seq": self.residual_seq,
            "gain_estimate": None if self.gain_estimate is None else self.gain_estimate.tolist(),
            "wallclock": self.wallclock,
            "schedule": self.schedule,
        }
        if self.keep == "full":
            out["iterates"] = [x.tolist() for x in self.iterates]
        return out


@dataclass
class SolveReport:
    output_value: np.ndarray
    output_policy: Policy | None
    trace: IterTrace
    certified: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "output_value": self.output_value.tolist(),
            "output_policy": None if self.output_policy is None else self.output_policy.to_dict(),
            "trace": self.trace.to_dict(),
            "certified": [c.to_dict() for c in self.certified],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def beta(schedule: str, t: int) -> float:
    """Halpern weight beta_t on the operator image."""
    if schedule == "anchor_two":
        return t / (t + 2)
    if schedule == "anchor_one":
        return t / (t + 1)
    raise ConfigError(f"unknown Halpern schedule {schedule!r}; expected one of {SCHEDULES}")


def halpern_lambda(schedule: str, t: int) -> float:
    """Lambda_t with Lambda_0 = 0 and Lambda_{t+1} = beta_{t+1}(Lambda_t + 1)."""
    lam = 0.0
    for i in range(1, t + 1):
        lam = beta(schedule, i) * (lam + 1.0)
    return lam


def effective_horizon(gamma: float) -> int:
    """floor(1/(1 - gamma)), snapping to the nearest integer when within rounding."""
    h = 1.0 / (1.0 - gamma)
    near = round(h)
    if abs(h - near) <= 1e-9 * max(1.0, h):
        return int(near)
    return math.floor(h)


def _default_residual(x, fx):
    return sup_dist(fx, x)


def _run(op, x0, n, trace, step, residual=_default_residual):
    """Drive ``x_{t+1} = step(t, x_t, op(x_t))`` for n steps."""
    x = np.array(x0, dtype=float)
    for t in range(n):
        fx = op(x)
        trace.record(x, residual(x, fx))
        x = step(t, x, fx)
    trace.close(x, residual(x, op(x)))
    return x


def _check_n(n):
    if n < 0:
        raise IterationBudgetTooSmall(n, 0)


# --------------------------------------------------------------------------
# basic schemes


def picard(op: OperatorHandle, x0, n: int, keep="residuals", residual=_default_residual) -> SolveReport:
    _check_n(n)
    trace = IterTrace(keep=keep, schedule="picard")
    t0 = time.perf_counter()
    x = _run(op, x0, n, trace, lambda t, x, fx: fx, residual)
    trace.wallclock = time.perf_counter() - t0
    return SolveReport(x, None, trace, meta={"algorithm": "picard", "n": n, "operator": op.label})


def halpern(
    op: OperatorHandle, x0, n: int, schedule="anchor_two", keep="residuals", residual=_default_residual
) -> SolveReport:
    """x_{t+1} = (1 - beta_{t+1}) x_0 + beta_{t+1} op(x_t)."""
    _check_n(n)
    beta(schedule, 1)
    anchor = np.array(x0, dtype=float)
    trace = IterTrace(keep=keep, schedule=schedule)

    def step(t, x, fx):
        b = beta(schedule, t + 1)
        return (1.0 - b) * anchor + b * fx

    t0 = time.perf_counter()
    x = _run(op, anchor, n, trace, step, residual)
    trace.wallclock = time.perf_counter() - t0
    return SolveReport(x, None, trace, meta={"algorithm": "halpern", "n": n, "operator": op.label})


def policy_eval_halpern(mdp: Mdp, pi, h0, n: int, keep="residuals") -> SolveReport:
    """Halpern (anchor_one) on the unshifted T^pi; residuals are ||T^pi h - h - rho^pi||."""
    pi = as_policy(pi)
    rho_pi = chain.gain(mdp, pi)
    op = evaluation_operator(mdp, pi)
    report = halpern(op, check_length(h0, mdp), n, "anchor_one", keep,
                     residual=lambda x, fx: sup_norm(fx - x - rho_pi))
    report.trace.gain_estimate = rho_pi
    report.meta.update(algorithm="policy_eval_halpern", gain=rho_pi.tolist())
    return report


# --------------------------------------------------------------------------
# Algorithm 1


def approx_shifted_halpern(mdp: Mdp, h0, n: int, keep="residuals") -> SolveReport:
    """n Picard steps of T, gain estimate, then n Halpern steps of T - rho_hat.

    The trace holds ||T x_t - x_t|| for t < n followed by
    ||T z_t - rho_hat - z_t|| for t = 0..n, where z_0 = x_n.
    """
    if n < 1:
        raise IterationBudgetTooSmall(n, 1)
    h0 = check_length(h0, mdp)
    t0 = time.perf_counter()
    phase1 = picard(bellman_operator(mdp), h0, n, keep)
    x_n = phase1.output_value
    rho_hat = (x_n - h0) / n
    phase2 = halpern(bellman_operator(mdp, shift=rho_hat), x_n, n, "anchor_two", keep)
    z_n = phase2.output_value

    trace = IterTrace(keep=keep, schedule="picard, then halpern anchor_two on T - rho_hat")
    if keep == "none":
        trace.residual_seq = list(phase2.trace.residual_seq)
    else:
        trace.extend(phase1.trace, drop_last=True)
        trace.extend(phase2.trace)
    trace.gain_estimate = rho_hat
    trace.wallclock = time.perf_counter() - t0
    meta = {"algorithm": "alg1", "n": n, "phase_length": n, "total_steps": 2 * n}
    return SolveReport(z_n, greedy(mdp, z_n, 1.0), trace, meta=meta)


# --------------------------------------------------------------------------
# Algorithms 2 and 3


def halpern_then_picard(op: OperatorHandle, x0, n: int, keep="residuals") -> SolveReport:
    """Halpern (anchor_two) for E = floor(1/(1-gamma)) - 1 steps, then Picard."""
    gamma = op.contraction
    if gamma is None or not gamma < 1.0:
        raise MissingContraction(f"{op.label}: halpern_then_picard needs a declared contraction factor < 1")
    _check_n(n)
    E = effective_horizon(gamma) - 1
    anchor = np.array(x0, dtype=float)
    trace = IterTrace(keep=keep, schedule=f"halpern anchor_two for {E} steps, then picard")

    def step(t, x, fx):
        if t < E:
            b = beta("anchor_two", t + 1)
            return (1.0 - b) * anchor + b * fx
        return fx

    t0 = time.perf_counter()
    x = _run(op, anchor, n, trace, step)
    trace.wallclock = time.perf_counter() - t0
    meta = {"algorithm": "alg2", "n": n, "gamma": gamma, "E": E}
    return SolveReport(x, None, trace, meta=meta)


def warm_start_htp(mdp: Mdp, gamma: float, n: int, keep="residuals") -> SolveReport:
    """E' undiscounted Picard steps from 0, then Algorithm 2 on T_gamma.

    The trace holds ||T x_t - x_t|| for t < E' followed by the discounted
    residuals ||T_gamma x - x|| of the Halpern-then-Picard phase.
    """
    if not 0.0 < gamma < 1.0:
        raise GammaOutOfRange(f"warm start needs gamma in (0, 1), got {gamma}")
    E_prime = effective_horizon(gamma)
    if n < E_prime:
        raise IterationBudgetTooSmall(n, E_prime)
    t0 = time.perf_counter()
    warm = picard(bellman_operator(mdp), np.zeros(mdp.n_states), E_prime, keep)
    main = halpern_then_picard(bellman_operator(mdp, gamma), warm.output_value, n - E_prime, keep)
    V = main.output_value

    trace = IterTrace(keep=keep, schedule=f"picard x {E_prime} on T, then {main.trace.schedule} on T_gamma")
    if keep == "none":
        trace.residual_seq = list(main.trace.residual_seq)
    else:
        trace.extend(warm.trace, drop_last=True)
        trace.extend(main.trace)
    trace.wallclock = time.perf_counter() - t0
    meta = {"algorithm": "alg3", "n": n, "gamma": gamma, "E_prime": E_prime, "E": main.meta["E"]}
    return SolveReport(V, greedy(mdp, V, gamma), trace, meta=meta)


def solve_multichain(mdp: Mdp, n: int, extra_k: float = 0.0, keep="residuals", truth=None) -> SolveReport:
    """gamma = 1 - 1/n and Algorithm 3 with budget (2 + extra_k) n.

    ``truth`` (a :class:`mvi.oracle.GroundTruth`) attaches the end-to-end
    suboptimality check.
    """
    if n < 2:
        raise IterationBudgetTooSmall(n, 2)
    if extra_k < 0:
        raise ConfigError(f"extra_k must be nonnegative, got {extra_k}")
    kn = extra_k * n
    if abs(kn - round(kn)) > 1e-9 * max(1.0, kn):
        raise ConfigError(f"extra_k * n = {kn} must be an integer")
    gamma = 1.0 - 1.0 / n
    report = warm_start_htp(mdp, gamma, 2 * n + int(round(kn)), keep)
    report.meta.update(algorithm="solve_multichain", n=n, extra_k=extra_k, budget=2 * n + int(round(kn)))
    if truth is not None:
        from .certify import multichain_check

        report.certified.append(multichain_check(mdp, report.output_policy, truth, n, extra_k))
    return report


def baseline_gamma(n: int) -> float:
    """gamma with 1/(1 - gamma) = n / (2 ln n)."""
    return 1.0 - 2.0 * math.log(n) / n


def dmdp_baseline(mdp: Mdp, n: int, keep="residuals", truth=None) -> SolveReport:
    """n discounted Picard steps from 0 at the horizon n / (2 ln n)."""
    if n < 4:
        raise IterationBudgetTooSmall(n, 4)
    gamma = baseline_gamma(n)
    report = picard(bellman_operator(mdp, gamma), np.zeros(mdp.n_states), n, keep)
    report.output_policy = greedy(mdp, report.output_value, gamma)
    report.meta.update(algorithm="baseline", gamma=gamma, horizon=1.0 / (1.0 - gamma), log="natural")
    if truth is not None:
        from .certify import baseline_check

        report.certified.append(baseline_check(mdp, report.output_policy, truth, n))
    return report
