"""Instance generators.

``gen_mkt`` draws its good-action rewards from SplitMix64 so traces are
reproducible bit for bit on any platform; the other random generators use
``numpy.random.default_rng``.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import EpsOutOfRange, InvalidInstance
from .mdp import Mdp, Policy, validate

MASK64 = (1 << 64) - 1


class SplitMix64:
    """Steele, Lea and Flood's 64-bit mixing generator."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def mkt_rewards(k: int, seed: int) -> list[float]:
    """Good-action rewards: 0.5 when the top bit of the draw is set, else 0."""
    rng = SplitMix64(seed)
    return [0.5 if rng.next() >> 63 else 0.0 for _ in range(k)]


def _unit(n, j):
    e = np.zeros(n)
    e[j] = 1.0
    return e


def gen_mkt(k: int, T: float, eps: float, seed: int = 0) -> Mdp:
    """The cycle-versus-escape family M(k, T).

    State 0 is absorbing. At states 1..k action 0 ("good") moves along the
    k-cycle and action 1 ("bad") pays 1 but leaks to state 0 with
    probability 1/T.
    """
    if k < 1 or T < 1 or not eps > 0:
        raise InvalidInstance(f"need k >= 1, T >= 1, eps > 0; got k={k}, T={T}, eps={eps}")
    n = k + 1
    good = mkt_rewards(k, seed)
    cycle_gain = math.fsum(good) / k
    absorbing = cycle_gain - eps
    if absorbing < -1.0:
        raise InvalidInstance(f"absorbing reward {absorbing} is below -1; eps={eps} is too large")
    # eps above the cycle gain forces a negative absorbing reward; Delta and
    # T_drop are invariant only under reward shifts, so widen the range instead
    reward_range = (min(0.0, absorbing), 1.0)
    states = [[(_unit(n, 0), absorbing)]]
    for s in range(1, n):
        nxt = s + 1 if s < k else 1
        bad = _unit(n, s) * (1.0 - 1.0 / T)
        bad[0] += 1.0 / T
        states.append([(_unit(n, nxt), good[s - 1]), (bad, 1.0)])
    name = f"M(k={k},T={T},eps={eps},seed={seed})"
    return validate(Mdp.from_actions(states, name=name, reward_range=reward_range))


def mkt_optimal_policy(k: int) -> Policy:
    """pi_c: the good action everywhere (and the only action at state 0)."""
    return Policy.deterministic([0] * (k + 1))


def gen_four_state(eps: float) -> Mdp:
    """Three self-loops with rewards 1, 1 - eps, 0 and a chooser state.

    The chooser (state 3) can move to any of the loops; moving to the
    second one pays 1, the other moves pay 0.
    """
    if not 0.0 < eps < 1.0:
        raise EpsOutOfRange(f"eps must lie in (0, 1), got {eps}")
    n = 4
    states = [
        [(_unit(n, 0), 1.0)],
        [(_unit(n, 1), 1.0 - eps)],
        [(_unit(n, 2), 0.0)],
        [(_unit(n, 0), 0.0), (_unit(n, 1), 1.0), (_unit(n, 2), 0.0)],
    ]
    return validate(Mdp.from_actions(states, name=f"four-state(eps={eps})"))


def four_state_optimal_policy() -> Policy:
    return Policy.deterministic([0, 0, 0, 0])


def gen_random_multichain(
    n_components: int,
    states_per: int,
    actions_per: int,
    leak_prob: float,
    seed: int,
    n_transient: int = 1,
    density: float = 0.5,
) -> Mdp:
    """Closed irreducible random blocks fed by a layer of transient states.

    Block actions stay inside their block; action 0 of every block state
    contains the block's cycle edge, so each block is irreducible under any
    policy. A transient action moves into a uniformly chosen block with
    probability ``1 - leak_prob`` and otherwise stays in the transient
    layer.
    """
    if min(n_components, states_per, actions_per) < 1 or n_transient < 0:
        raise InvalidInstance("sizes must be positive")
    if not 0.0 <= leak_prob < 1.0:
        raise InvalidInstance(f"leak_prob must lie in [0, 1), got {leak_prob}")
    rng = np.random.default_rng(seed)
    n = n_components * states_per + n_transient
    states = []
    for c in range(n_components):
        block = np.arange(c * states_per, (c + 1) * states_per)
        for i, s in enumerate(block):
            acts = []
            for a in range(actions_per):
                w = rng.random(states_per) * (rng.random(states_per) < density)
                if a == 0:
                    w[(i + 1) % states_per] += rng.random() + 0.1
                elif not w.any():
                    w[rng.integers(states_per)] = 1.0
                probs = np.zeros(n)
                probs[block] = w / w.sum()
                acts.append((probs, rng.random()))
            states.append(acts)
    layer = np.arange(n_components * states_per, n)
    for _ in layer:
        acts = []
        for a in range(actions_per):
            probs = np.zeros(n)
            target = rng.integers(n_components)
            block = np.arange(target * states_per, (target + 1) * states_per)
            w = rng.random(states_per) + 1e-3
            probs[block] = (1.0 - leak_prob) * w / w.sum()
            if leak_prob > 0.0:
                v = rng.random(layer.size) + 1e-3
                probs[layer] += leak_prob * v / v.sum()
            acts.append((probs / probs.sum(), rng.random()))
        states.append(acts)
    name = f"multichain(c={n_components},s={states_per},a={actions_per},leak={leak_prob},seed={seed})"
    return validate(Mdp.from_actions(states, name=name))


def gen_random(n_states: int, n_actions: int, seed: int, density: float = 0.6, max_actions=None) -> Mdp:
    """Unstructured random MDP; ``max_actions`` draws a ragged action count per state."""
    if n_states < 1 or n_actions < 1:
        raise InvalidInstance("sizes must be positive")
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(n_states):
        count = n_actions if max_actions is None else int(rng.integers(1, max_actions + 1))
        acts = []
        for _ in range(count):
            w = rng.random(n_states) * (rng.random(n_states) < density)
            if not w.any():
                w[rng.integers(n_states)] = 1.0
            acts.append((w / w.sum(), rng.random()))
        states.append(acts)
    return validate(Mdp.from_actions(states, name=f"random(n={n_states},a={n_actions},seed={seed})"))


def builtin_suite():
    """``[(label, mdp, reference_policy_or_None)]`` used by tests and the CLI."""
    return [
        ("four-state eps=0.25", gen_four_state(0.25), four_state_optimal_policy()),
        ("four-state eps=0.5", gen_four_state(0.5), four_state_optimal_policy()),
        ("four-state eps=0.05", gen_four_state(0.05), four_state_optimal_policy()),
        ("M(2,5,0.1)", gen_mkt(2, 5, 0.1, seed=0), mkt_optimal_policy(2)),
        ("multichain", gen_random_multichain(2, 2, 2, 0.3, seed=7), None),
    ]
