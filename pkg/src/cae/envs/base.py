from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


class TerminalStateError(AssertionError):
    """Raised when an episode that already ended is stepped again."""


class NotEnumerableError(ValueError):
    pass


@dataclass(frozen=True)
class EnvSpec:
    name: str
    action_count: int
    state_bounds: tuple
    goal_bounds: tuple
    max_episode_length: int
    stochastic: bool
    n_states: int | None = None
    layout: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_episode_length < 1:
            raise ValueError("max_episode_length must be >= 1")
        if self.action_count < 1:
            raise ValueError("action_count must be >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=list)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


class Env(ABC):
    """Goal-conditioned environment with a finite action set.

    States and goals are numpy values: integer indices for the enumerable
    grid worlds, float arrays ``(x, y, heading)`` / ``(x, y)`` for the car.
    Methods suffixed ``_batch`` take stacked arrays and are what the learner
    uses; the scalar forms exist for readability in rollouts and tests.
    """

    spec: EnvSpec
    action_names: list[str]
    enumerable: bool = False

    @property
    def n_actions(self) -> int:
        return self.spec.action_count

    @property
    def max_episode_length(self) -> int:
        return self.spec.max_episode_length

    @abstractmethod
    def step(self, s, a: int, rng: np.random.Generator) -> tuple[Any, bool]:
        """Sample ``s'`` and whether the episode terminated without success."""

    @abstractmethod
    def goal_check_batch(self, S, G) -> np.ndarray: ...

    def goal_check(self, s, g) -> bool:
        return bool(self.goal_check_batch(np.asarray(s)[None], np.asarray(g)[None])[0])

    def terminal_batch(self, S) -> np.ndarray:
        return np.zeros(len(S), dtype=bool)

    def is_terminal(self, s) -> bool:
        return bool(self.terminal_batch(np.asarray(s)[None])[0])

    @abstractmethod
    def initial_state(self, rng: np.random.Generator, mode: str = "train"): ...

    @abstractmethod
    def sample_goal(self, rng: np.random.Generator): ...

    @abstractmethod
    def project(self, S) -> np.ndarray:
        """Goal achieved by each state (used for hindsight relabelling)."""

    @abstractmethod
    def metric(self, S, G) -> np.ndarray:
        """Distance that one step can reduce by at most one unit."""

    @abstractmethod
    def sample_goals_within(self, S, H, rng: np.random.Generator) -> np.ndarray:
        """Uniform goals from ``{g : metric(s, g) <= h}``, one per row."""

    @abstractmethod
    def encode_states(self, S) -> np.ndarray: ...

    @abstractmethod
    def encode_goals(self, G) -> np.ndarray: ...

    @abstractmethod
    def eval_goals(self) -> list[tuple[Any, str]]:
        """Fixed evaluation goals with their difficulty stratum."""

    @property
    def state_shape(self) -> tuple:
        return ()

    @property
    def goal_shape(self) -> tuple:
        return ()

    state_dtype: Any = np.int64
    goal_dtype: Any = np.int64

    def enumerate_kernel(self) -> list[tuple[int, int, int, float]]:
        raise NotEnumerableError(f"{self.spec.name} has no enumerable kernel")

    def describe_state(self, s) -> str:
        return str(s)
