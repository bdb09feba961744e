"""Tabular MDP data model, JSON I/O and vector seminorms.

Actions are stored ragged: state ``s`` owns the flat action rows
``offsets[s]:offsets[s+1]`` of the ``(m, n)`` transition array ``P`` and the
length-``m`` reward vector ``r``.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyActionSet,
    EmptyVector,
    LengthMismatch,
    ParseError,
    PolicyMismatch,
    RewardRangeError,
    RowSumError,
)

log = logging.getLogger(__name__)

ROW_TOL = 1e-12
UNIT_RANGE = (0.0, 1.0)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


class Mdp:
    """Finite MDP with per-state action lists.

    Build with :meth:`from_actions`; run :func:`validate` before trusting it.
    """

    __slots__ = ("P", "r", "offsets", "name", "validated", "reward_range", "_pad", "_state_of")

    def __init__(self, P, r, offsets, name=None, validated=False, reward_range=UNIT_RANGE):
        self.P = _frozen(P)
        self.r = _frozen(r)
        self.offsets = _frozen(offsets, dtype=np.int64)
        self.name = name
        self.validated = validated
        self.reward_range = (float(reward_range[0]), float(reward_range[1]))
        counts = np.diff(self.offsets)
        width = int(counts.max()) if len(counts) else 0
        pad = np.full((len(counts), width), -1, dtype=np.int64)
        for s, c in enumerate(counts):
            pad[s, :c] = np.arange(self.offsets[s], self.offsets[s] + c)
        pad.flags.writeable = False
        self._pad = pad
        self._state_of = _frozen(np.repeat(np.arange(len(counts)), counts), dtype=np.int64)

    @classmethod
    def from_actions(cls, states, name=None, reward_range=UNIT_RANGE):
        """``states[s]`` is a list of ``(probs, reward)`` pairs."""
        n = len(states)
        rows, rewards, offsets = [], [], [0]
        for s, acts in enumerate(states):
            for a, (probs, reward) in enumerate(acts):
                probs = np.asarray(probs, dtype=float)
                if probs.shape != (n,):
                    raise LengthMismatch(
                        f"state {s} action {a}: {probs.size} probabilities for {n} states"
                    )
                rows.append(probs)
                rewards.append(float(reward))
            offsets.append(len(rows))
        P = np.array(rows, dtype=float).reshape(len(rows), n)
        return cls(P, rewards, offsets, name=name, reward_range=reward_range)

    @property
    def n_states(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_pairs(self) -> int:
        return len(self.r)

    @property
    def action_counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def state_of(self) -> np.ndarray:
        """State index of every flat action row."""
        return self._state_of

    @property
    def pad_index(self) -> np.ndarray:
        """``(n, max_actions)`` flat indices, ``-1`` where a state has fewer actions."""
        return self._pad

    def pair(self, s, a) -> int:
        if not 0 <= a < self.offsets[s + 1] - self.offsets[s]:
            raise PolicyMismatch(f"state {s} has no action {a}")
        return int(self.offsets[s] + a)

    def actions(self, s):
        """List of ``(probs, reward)`` for state ``s``."""
        lo, hi = self.offsets[s], self.offsets[s + 1]
        return [(self.P[i], float(self.r[i])) for i in range(lo, hi)]

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.name == other.name
            and self.reward_range == other.reward_range
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.P, other.P)
            and np.array_equal(self.r, other.r)
        )

    __hash__ = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Mdp{label} n_states={self.n_states} pairs={self.n_pairs}>"


def validate(mdp: Mdp) -> Mdp:
    """Check every invariant and return the MDP tagged as validated.

    Rows within ``ROW_TOL`` of summing to one are renormalized; rows that
    already sum to one to within a few ulps are left bit-identical so that
    repeated load/save cycles do not drift. Rewards must lie in
    ``mdp.reward_range``, which defaults to [0, 1]; wider declared ranges are
    accepted only inside [-1, 1] so that ||r|| <= 1 still holds.
    """
    n = mdp.n_states
    r_lo, r_hi = mdp.reward_range
    if not (-1.0 <= r_lo <= r_hi <= 1.0):
        raise RewardRangeError(None, None, mdp.reward_range)
    P = np.array(mdp.P)
    for s in range(n):
        lo, hi = mdp.offsets[s], mdp.offsets[s + 1]
        if hi == lo:
            raise EmptyActionSet(s)
        for i in range(lo, hi):
            a = int(i - lo)
            row = P[i]
            reward = mdp.r[i]
            if not (np.all(np.isfinite(row)) and np.all(row >= 0.0)):
                raise RowSumError(s, a, float(np.sum(row)))
            total = math.fsum(row)
            if abs(total - 1.0) > ROW_TOL:
                raise RowSumError(s, a, total)
            if abs(total - 1.0) > 8 * np.finfo(float).eps * n:
                P[i] = row / total
            if not (np.isfinite(reward) and r_lo <= reward <= r_hi):
                raise RewardRangeError(s, a, float(reward), mdp.reward_range)
    return Mdp(P, mdp.r, mdp.offsets, name=mdp.name, validated=True, reward_range=mdp.reward_range)


# --------------------------------------------------------------------------
# JSON


def to_dict(mdp: Mdp) -> dict:
    out = {}
    if mdp.name is not None:
        out["name"] = mdp.name
    out["n_states"] = mdp.n_states
    if mdp.reward_range != UNIT_RANGE:
        out["reward_range"] = list(mdp.reward_range)
    out["states"] = [
        {"actions": [{"probs": p.tolist(), "reward": r} for p, r in mdp.actions(s)]}
        for s in range(mdp.n_states)
    ]
    return out


def save(mdp: Mdp) -> bytes:
    return json.dumps(to_dict(mdp)).encode()


def _warn_unknown(obj, known, path):
    for key in obj:
        if key not in known:
            log.warning("%s: ignoring unknown key %r", path, key)


def from_dict(data, path="$") -> Mdp:
    if not isinstance(data, dict):
        raise ParseError(path, "expected an object")
    _warn_unknown(data, {"name", "n_states", "reward_range", "states"}, path)
    for key in ("n_states", "states"):
        if key not in data:
            raise ParseError(f"{path}.{key}", "missing key")
    n = data["n_states"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError(f"{path}.n_states", "must be a positive integer")
    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise ParseError(f"{path}.name", "must be a string")
    reward_range = data.get("reward_range", UNIT_RANGE)
    if not (
        isinstance(reward_range, (list, tuple))
        and len(reward_range) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in reward_range)
    ):
        raise ParseError(f"{path}.reward_range", "must be a pair of numbers")
    states = data["states"]
    if not isinstance(states, list) or len(states) != n:
        raise ParseError(f"{path}.states", f"must be a list of {n} states")
    parsed = []
    for s, st in enumerate(states):
        sp = f"{path}.states[{s}]"
        if not isinstance(st, dict):
            raise ParseError(sp, "expected an object")
        _warn_unknown(st, {"actions"}, sp)
        if "actions" not in st:
            raise ParseError(f"{sp}.actions", "missing key")
        if not isinstance(st["actions"], list):
            raise ParseError(f"{sp}.actions", "must be a list")
        acts = []
        for a, act in enumerate(st["actions"]):
            ap = f"{sp}.actions[{a}]"
            if not isinstance(act, dict):
                raise ParseError(ap, "expected an object")
            _warn_unknown(act, {"probs", "reward"}, ap)
            for key in ("probs", "reward"):
                if key not in act:
                    raise ParseError(f"{ap}.{key}", "missing key")
            probs = act["probs"]
            if not isinstance(probs, list) or len(probs) != n:
                raise ParseError(f"{ap}.probs", f"must be a list of {n} numbers")
            if not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs):
                raise ParseError(f"{ap}.probs", "entries must be numbers")
            reward = act["reward"]
            if not isinstance(reward, (int, float)) or isinstance(reward, bool):
                raise ParseError(f"{ap}.reward", "must be a number")
            acts.append((probs, reward))
        parsed.append(acts)
    return validate(Mdp.from_actions(parsed, name=name, reward_range=reward_range))


def load(raw) -> Mdp:
    """Parse and validate MDP JSON (``bytes`` or ``str``)."""
    if isinstance(raw, bytes):
        raw = raw.decode()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError("$", exc.msg, line=exc.lineno) from None
    return from_dict(data)


# --------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class Policy:
    """Deterministic (``actions``) or randomized (``probs``) Markov policy."""

    actions: tuple[int, ...] | None = None
    probs: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if (self.actions is None) == (self.probs is None):
            raise PolicyMismatch("exactly one of actions/probs must be given")

    @classmethod
    def deterministic(cls, actions) -> Policy:
        return cls(actions=tuple(int(a) for a in actions))

    @classmethod
    def randomized(cls, probs) -> Policy:
        return cls(probs=tuple(tuple(float(p) for p in row) for row in probs))

    @property
    def kind(self) -> str:
        return "deterministic" if self.actions is not None else "randomized"

    @property
    def is_deterministic(self) -> bool:
        return self.actions is not None

    def check(self, mdp: Mdp) -> None:
        n = mdp.n_states
        counts = mdp.action_counts
        rows = self.actions if self.actions is not None else self.probs
        if len(rows) != n:
            raise PolicyMismatch(f"policy covers {len(rows)} states, MDP has {n}")
        if self.actions is not None:
            for s, a in enumerate(self.actions):
                if not 0 <= a < counts[s]:
                    raise PolicyMismatch(f"state {s}: action {a} out of range")
        else:
            for s, row in enumerate(self.probs):
                if len(row) != counts[s]:
                    raise PolicyMismatch(f"state {s}: {len(row)} probabilities for {counts[s]} actions")
                if min(row) < 0 or abs(math.fsum(row) - 1.0) > ROW_TOL:
                    raise PolicyMismatch(f"state {s}: not a probability vector")

    def weights(self, mdp: Mdp) -> np.ndarray:
        """pi(a|s) laid out over the flat action rows."""
        self.check(mdp)
        w = np.zeros(mdp.n_pairs)
        if self.actions is not None:
            w[mdp.offsets[:-1] + np.asarray(self.actions, dtype=np.int64)] = 1.0
        else:
            w[:] = np.concatenate([np.asarray(row, dtype=float) for row in self.probs])
        return w

    def flat_index(self, mdp: Mdp) -> np.ndarray:
        if self.actions is None:
            raise PolicyMismatch("flat index is only defined for deterministic policies")
        self.check(mdp)
        return mdp.offsets[:-1] + np.asarray(self.actions, dtype=np.int64)

    def matrices(self, mdp: Mdp) -> tuple[np.ndarray, np.ndarray]:
        """``(P_pi, r_pi)``."""
        if self.actions is not None:
            idx = self.flat_index(mdp)
            return np.array(mdp.P[idx]), np.array(mdp.r[idx])
        w = self.weights(mdp)
        P_pi = np.add.reduceat(w[:, None] * mdp.P, mdp.offsets[:-1], axis=0)
        r_pi = np.add.reduceat(w * mdp.r, mdp.offsets[:-1])
        return P_pi, r_pi

    def project(self, mdp: Mdp, q) -> np.ndarray:
        """Policy average of a flat state-action vector."""
        q = np.asarray(q, dtype=float)
        if self.actions is not None:
            return q[self.flat_index(mdp)]
        return np.add.reduceat(self.weights(mdp) * q, mdp.offsets[:-1])

    def to_dict(self) -> dict:
        if self.actions is not None:
            return {"kind": "deterministic", "actions": list(self.actions)}
        return {"kind": "randomized", "probs": [list(row) for row in self.probs]}

    @classmethod
    def from_dict(cls, data) -> Policy:
        if "actions" in data:
            return cls.deterministic(data["actions"])
        if "probs" in data:
            return cls.randomized(data["probs"])
        raise ParseError("$", "policy needs 'actions' or 'probs'")


def policy_count(mdp: Mdp) -> int:
    return math.prod(int(c) for c in mdp.action_counts)


def enumerate_policies(mdp: Mdp) -> Iterator[Policy]:
    """All deterministic policies, lexicographic in (state 0 action, state 1 action, ...)."""
    for acts in itertools.product(*(range(int(c)) for c in mdp.action_counts)):
        yield Policy(actions=acts)


# --------------------------------------------------------------------------
# vector norms


def _vec(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


def sup_norm(v) -> float:
    v = _vec(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def sup_dist(u, v) -> float:
    u, v = _vec(u), _vec(v)
    if u.shape != v.shape:
        raise LengthMismatch(f"lengths {u.shape} and {v.shape} differ")
    return sup_norm(u - v)


def span(v) -> float:
    v = _vec(v)
    if v.size == 0:
        raise EmptyVector("span of an empty vector")
    return float(np.max(v) - np.min(v))


def check_length(v, mdp: Mdp) -> np.ndarray:
    v = _vec(v)
    if v.shape != (mdp.n_states,):
        raise LengthMismatch(f"vector of shape {v.shape} for {mdp.n_states} states")
    return v


def as_policy(pi: Policy | Sequence[int]) -> Policy:
    return pi if isinstance(pi, Policy) else Policy.deterministic(pi)
