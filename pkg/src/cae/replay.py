"""Episode storage, horizon schedule, goal relabelling and target construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Episode:
    """``states`` has one more entry than ``actions``; ``terminal`` marks an
    episode that ended in a terminal non-goal state (a hole)."""

    states: np.ndarray
    actions: np.ndarray
    goal: object
    terminal: bool = False
    index: int = 0
    success: bool = False

    def __post_init__(self):
        self.states = np.asarray(self.states)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("episode needs exactly one more state than actions")

    def __len__(self) -> int:
        return len(self.actions)

    def to_json(self) -> str:
        return json.dumps({
            "index": self.index,
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
            "goal": np.asarray(self.goal).tolist(),
            "terminal": bool(self.terminal),
            "success": bool(self.success),
        })

    @classmethod
    def from_json(cls, line: str, state_dtype=np.int64) -> "Episode":
        d = json.loads(line)
        return cls(np.asarray(d["states"], dtype=state_dtype), d["actions"],
                   np.asarray(d["goal"], dtype=state_dtype) if isinstance(d["goal"], list) else d["goal"],
                   d["terminal"], d["index"], d.get("success", False))


def dump_episodes(path, episodes) -> None:
    with open(path, "w") as fh:
        for ep in episodes:
            fh.write(ep.to_json() + "\n")


def load_episodes(path, state_dtype=np.int64) -> list[Episode]:
    with open(path) as fh:
        return [Episode.from_json(line, state_dtype) for line in fh if line.strip()]


@dataclass
class HScheduleConfig:
    """``P(h) ∝ h ** (-kappa * n / N)`` over ``h = 1..h_max``."""

    kappa: float = 3.0
    h_max: int = 50
    n_total: int = 1

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.h_max < 1 or self.n_total < 1:
            raise ValueError("h_max and n_total must be >= 1")

    def probs(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.n_total:
            raise ValueError(f"n_GD={n} outside [0, {self.n_total}]")
        h = np.arange(1, self.h_max + 1, dtype=float)
        w = h ** (-self.kappa * n / self.n_total)
        return w / w.sum()

    def sample(self, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.probs(n))
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return np.minimum(idx, self.h_max - 1) + 1


@dataclass
class RelabelConfig:
    """``future`` picks goals achieved later in the same episode;
    ``reachability`` picks uniformly among goals with ``d(s, g) <= h``."""

    mode: str = "future"
    clip: bool = False

    def __post_init__(self):
        if self.mode not in ("future", "reachability"):
            raise ValueError(f"unknown relabel mode {self.mode!r}")


@dataclass
class TrainSample:
    """A batch of ``(s, a, s', g, h)`` with goal-check bits, as parallel arrays."""

    S: np.ndarray
    A: np.ndarray
    S2: np.ndarray
    G: np.ndarray
    H: np.ndarray
    hit: np.ndarray
    hit2: np.ndarray
    dead2: np.ndarray
    episode: np.ndarray = field(default=None)
    t: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.A)


class ReplayBuffer:
    """Unbounded episode store backed by flat arrays.

    Episodes without transitions are kept for bookkeeping but never sampled.
    """

    def __init__(self, env):
        self.env = env
        self.episodes: list[Episode] = []
        self._states: list = []
        self._achieved: list = []
        self._actions: list = []
        self._meta = {"s_off": [], "a_off": [], "len": [], "term": [], "goal": []}
        self._n_states = 0
        self._n_actions = 0
        self._frozen = None

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def n_transitions(self) -> int:
        return self._n_actions

    def append(self, ep: Episode) -> None:
        for t in range(len(ep)):
            # consecutive transitions chain by construction; check bounds only
            if not 0 <= ep.actions[t] < self.env.n_actions:
                raise ValueError(f"action {ep.actions[t]} out of range")
        self.episodes.append(ep)
        self._states.append(ep.states)
        self._achieved.append(self.env.project(ep.states))
        self._actions.append(ep.actions)
        m = self._meta
        m["s_off"].append(self._n_states)
        m["a_off"].append(self._n_actions)
        m["len"].append(len(ep))
        m["term"].append(bool(ep.terminal))
        m["goal"].append(ep.goal)
        self._n_states += len(ep.states)
        self._n_actions += len(ep)
        self._frozen = None

    def _arrays(self):
        if self._frozen is None:
            m = self._meta
            lens = np.asarray(m["len"], dtype=np.int64)
            self._frozen = dict(
                states=np.concatenate(self._states),
                achieved=np.concatenate(self._achieved),
                actions=np.concatenate(self._actions) if self._n_actions else np.zeros(0, np.int64),
                s_off=np.asarray(m["s_off"], dtype=np.int64),
                a_off=np.asarray(m["a_off"], dtype=np.int64),
                len=lens,
                term=np.asarray(m["term"], dtype=bool),
                goal=np.asarray(m["goal"]),
                usable=np.flatnonzero(lens > 0),
            )
        return self._frozen

    def transition(self, episode: int, t: int):
        ep = self.episodes[episode]
        return ep.states[t], int(ep.actions[t]), ep.states[t + 1]

    def sample_batch(self, n: int, rng: np.random.Generator, h: np.ndarray | None,
                     relabel: RelabelConfig) -> TrainSample:
        """Uniform episode, uniform step within it, then a relabelled goal.

        ``h`` holds one horizon per sample (``None`` for variants without one).
        In ``future`` mode the goal is the projection of a uniformly chosen
        later state ``s_{t+1}..s_T``; the terminal state of a failed episode
        does not count, and with nothing left the behaviour goal is used.
        """
        arr = self._arrays()
        if not len(arr["usable"]):
            raise ValueError("replay buffer has no transitions")
        ep = arr["usable"][rng.integers(len(arr["usable"]), size=n)]
        L = arr["len"][ep]
        t = np.minimum((rng.random(n) * L).astype(np.int64), L - 1)
        si = arr["s_off"][ep] + t
        S = arr["states"][si]
        S2 = arr["states"][si + 1]
        A = arr["actions"][arr["a_off"][ep] + t]
        if relabel.mode == "future":
            n_future = L - t - arr["term"][ep].astype(np.int64)
            k = np.minimum((rng.random(n) * np.maximum(n_future, 1)).astype(np.int64),
                           np.maximum(n_future, 1) - 1)
            G = arr["achieved"][si + 1 + k]
            fallback = n_future <= 0
            if fallback.any():
                G[fallback] = arr["goal"][ep[fallback]]
        else:
            if h is None:
                raise ValueError("reachability relabelling needs a horizon")
            G = self.env.sample_goals_within(S, h, rng)
        env = self.env
        hit = env.goal_check_batch(S, G)
        hit2 = env.goal_check_batch(S2, G)
        dead2 = env.terminal_batch(S2) & ~hit2
        H = np.zeros(n, dtype=np.int64) if h is None else np.asarray(h)
        return TrainSample(S, A, S2, G, H, hit, hit2, dead2, ep, t)


def make_targets(batch: TrainSample, target, relabel: RelabelConfig, env=None,
                 variant: str = "C", gamma=None) -> np.ndarray:
    """Single-sample bootstrap targets ``y_i`` for each variant.

    C: ``1`` if ``s`` satisfies ``g``, ``0`` if ``s'`` is a dead end, else
       ``max_a' C'(s', a', g, h - 1)``; with clipping ``d(s', g) > h - 1``
       forces ``0``.
    A: ``max_a' A'(s', a', g, h - 1)`` with goals not absorbing.
    D: ``G(s', g) + gamma (1 - G(s', g)) max_a' D'(s', a', g, gamma)``.
    Q: ``1`` at the goal, else ``gamma * V'(s')`` with ``V' = 1`` at the goal.
    """
    v = variant.upper()
    n = len(batch)
    if v in ("C", "A"):
        if (batch.H < 1).any():
            raise ValueError("training horizons must be >= 1")
        # predict() already applies h = 0 and terminal base cases at s'
        y = target.predict(batch.S2, batch.G, batch.H - 1).max(axis=1)
        if v == "C":
            y = np.where(batch.hit, 1.0, y)
            if relabel.clip:
                if env is None:
                    raise ValueError("clipping needs the environment metric")
                far = env.metric(batch.S2, batch.G) > batch.H - 1
                y = np.where(far & ~batch.hit, 0.0, y)
        return y
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    if v == "D":
        nxt = target.predict(batch.S2, batch.G, gamma).max(axis=1)
        hit2 = batch.hit2.astype(float)
        y = hit2 + gamma * (1.0 - hit2) * np.where(batch.dead2, 0.0, nxt)
        return y
    if v == "Q":
        nxt = target.predict(batch.S2, batch.G, np.zeros(n)).max(axis=1)
        nxt = np.where(batch.hit2, 1.0, np.where(batch.dead2, 0.0, nxt))
        return np.where(batch.hit, 1.0, gamma * nxt)
    raise ValueError(f"unknown variant {variant!r}")
