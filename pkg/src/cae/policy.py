"""Policies recovered from accessibility functions.

Any object with ``action_values(S, G, H) -> (B, n_actions)`` works here:
learned ``AccessFn`` instances, their target snapshots and exact tables.
Ties between actions always go to the lowest index (``np.argmax``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class HorizonSelectorConfig:
    """Safety threshold ``alpha`` and the viable horizon set.

    ``horizons`` defaults to ``1..h_max``. With ``metric_floor`` the set for
    a given ``(s, g)`` starts at ``max(1, d(s, g))`` instead.
    """

    alpha: float = 0.9
    h_max: int = 50
    horizons: tuple | None = None
    metric_floor: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        H = self.base_horizons()
        if len(H) == 0 or (np.diff(H) <= 0).any():
            raise ValueError("horizon set must be non-empty and strictly increasing")

    def base_horizons(self) -> np.ndarray:
        if self.horizons is None:
            return np.arange(1, self.h_max + 1)
        return np.asarray(self.horizons, dtype=np.int64)

    def horizon_set(self, env=None, s=None, g=None) -> np.ndarray:
        H = self.base_horizons()
        if self.metric_floor and env is not None:
            d = float(env.metric(np.asarray([s]), np.asarray([g]))[0])
            kept = H[H >= d]
            return kept if len(kept) else H[-1:]
        return H


def _values(fn, s, g, H) -> np.ndarray:
    H = np.atleast_1d(np.asarray(H))
    S = np.repeat(np.asarray([s]), len(H), axis=0)
    G = np.repeat(np.asarray([g]), len(H), axis=0)
    return fn.action_values(S, G, H)


def greedy_action(fn, s, g, h: int) -> int:
    if h < 1:
        raise ValueError("greedy action needs h >= 1")
    return int(np.argmax(_values(fn, s, g, [h])[0]))


def _select(V: np.ndarray, H: np.ndarray, alpha: float) -> int:
    per_h = V.max(axis=1)
    M = per_h.max()
    return int(np.flatnonzero(per_h >= alpha * M)[0])


def select_horizon(fn, s, g, cfg: HorizonSelectorConfig, env=None) -> int:
    """Smallest ``h`` in ``H`` with ``max_a fn(s, a, g, h) >= alpha * M(s, g)``."""
    H = cfg.horizon_set(env, s, g)
    return int(H[_select(_values(fn, s, g, H), H, cfg.alpha)])


def horizon_free_policy(fn, cfg: HorizonSelectorConfig, env=None):
    """``(s, g) -> action``: greedy at the selected horizon ``h_alpha``."""

    def act(s, g, rng=None) -> int:
        H = cfg.horizon_set(env, s, g)
        V = _values(fn, s, g, H)
        return int(np.argmax(V[_select(V, H, cfg.alpha)]))

    return act


def horizon_aware_policy(fn):
    """``(s, g, h) -> action``; callers pass ``h - 1`` after each step."""

    def act(s, g, h: int, rng=None) -> int:
        return greedy_action(fn, s, g, h)

    return act


def epsilon_greedy(policy, epsilon: float, n_actions: int):
    """With probability ``epsilon`` a uniform action, otherwise ``policy``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")

    def act(s, g, rng: np.random.Generator) -> int:
        if epsilon > 0 and rng.random() < epsilon:
            return int(rng.integers(n_actions))
        return policy(s, g, rng)

    return act


def uniform_policy(n_actions: int):
    def act(s, g, rng: np.random.Generator) -> int:
        return int(rng.integers(n_actions))

    return act


def most_likely_trajectory(env, fn, s0, g, h: int):
    """Greedy horizon-aware rollout where each next state is the most likely one.

    Stops at the goal, at a terminal state or when the horizon runs out.
    Returns ``(states, actions)``.
    """
    states, actions = [s0], []
    s = s0
    for t in range(h):
        if env.goal_check(s, g) or env.is_terminal(s):
            break
        a = greedy_action(fn, s, g, h - t)
        s = env.most_likely_next(s, a)
        states.append(s)
        actions.append(a)
    return states, actions


def as_policy_spec(fn, mdp, horizon_free: HorizonSelectorConfig | None = None, env=None):
    """Deterministic ``PolicySpec`` from ``fn`` for exact forward evaluation.

    Horizon-aware greedy by default; with ``horizon_free`` the remaining
    horizon is ignored and ``h_alpha`` is reselected at every state.
    """
    from .oracle import PolicySpec

    m = mdp.n_actions
    cache: dict = {}
    hf = None if horizon_free is None else horizon_free_policy(fn, horizon_free, env)

    def probs(s, j, h):
        key = (s, j, None if hf else h)
        if key not in cache:
            g = int(mdp.goals[j])
            a = hf(s, g) if hf else greedy_action(fn, s, g, h)
            cache[key] = np.eye(m)[a]
        return cache[key]

    return PolicySpec.from_callable(probs, m)
