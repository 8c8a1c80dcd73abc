"""Enumerable grid worlds: frozen lake, mini maze, line-world, checkerboard.

All of them share one implementation. A layout fixes the grid size, wall and
hole cells, the action set, the slip probability and the boundary rule.
States and goals are both indices into the list of open (non-wall) cells,
ordered row by row from ``y = 0``.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..kv import ConfigError, parse_cells
from .base import Env, EnvSpec, TerminalStateError

CARDINAL = {"up": (0, 1), "right": (1, 0), "down": (0, -1), "left": (-1, 0)}
LINE = {"-1": (-1, 0), "+1": (1, 0)}


class GridEnv(Env):
    enumerable = True

    def __init__(
        self,
        name: str,
        width: int,
        height: int,
        *,
        actions: str = "cardinal",
        walls=(),
        holes=(),
        slip: float = 0.0,
        boundary: str = "clamp",
        start=(0, 0),
        train_start: str = "uniform_safe",
        test_goal=None,
        max_episode_length: int = 50,
        strata=(4, 8),
        layout: dict | None = None,
    ):
        if boundary not in ("clamp", "reflect"):
            raise ConfigError(f"unknown boundary rule {boundary!r}")
        if train_start not in ("uniform_safe", "fixed"):
            raise ConfigError(f"unknown train_start {train_start!r}")
        if not 0.0 <= slip <= 0.5:
            raise ConfigError("slip must lie in [0, 0.5]")
        self.width, self.height = int(width), int(height)
        moves = {"cardinal": CARDINAL, "line": LINE}[actions]
        self.action_names = list(moves)
        self._moves = list(moves.values())
        self.slip = float(slip)
        self.boundary = boundary
        self.train_start = train_start
        self.strata_thresholds = tuple(strata)

        walls = {tuple(c) for c in walls}
        self.cells = [
            (x, y) for y in range(self.height) for x in range(self.width) if (x, y) not in walls
        ]
        self._index = {c: i for i, c in enumerate(self.cells)}
        for c in list(holes) + [start] + ([test_goal] if test_goal is not None else []):
            if tuple(c) not in self._index:
                raise ConfigError(f"cell {c} is outside the grid or inside a wall")
        self.n_states = self.n_goals = len(self.cells)
        self.holes = np.zeros(self.n_states, dtype=bool)
        for c in holes:
            self.holes[self._index[tuple(c)]] = True
        self.start = self._index[tuple(start)]
        if self.holes[self.start]:
            raise ConfigError("start cell is a hole")
        self.test_goal = None if test_goal is None else self._index[tuple(test_goal)]
        self.xy = np.array(self.cells, dtype=np.int64)

        self.spec = EnvSpec(
            name=name,
            action_count=len(self._moves),
            state_bounds=((0, self.width - 1), (0, self.height - 1)),
            goal_bounds=((0, self.width - 1), (0, self.height - 1)),
            max_episode_length=int(max_episode_length),
            stochastic=self.slip > 0,
            n_states=self.n_states,
            layout=dict(layout or {}),
        )
        self._outcomes = [[self._transitions(s, a) for a in range(self.n_actions)]
                          for s in range(self.n_states)]
        self._safe = np.flatnonzero(~self.holes)
        self._goal_order, self._goal_dist = self._sorted_goals()

    # -- geometry --------------------------------------------------------

    def index(self, x: int, y: int) -> int:
        return self._index[(x, y)]

    def cell(self, s: int) -> tuple[int, int]:
        return self.cells[int(s)]

    def describe_state(self, s) -> str:
        return str(self.cell(s))

    def _move(self, s: int, d: tuple[int, int]) -> int:
        x, y = self.cells[s]
        target = (x + d[0], y + d[1])
        if target in self._index:
            return self._index[target]
        if self.boundary == "reflect" and not (0 <= target[0] < self.width and 0 <= target[1] < self.height):
            bounce = (x - d[0], y - d[1])
            if bounce in self._index:
                return self._index[bounce]
        return s

    def _transitions(self, s: int, a: int) -> list[tuple[int, float]]:
        if self.holes[s]:
            return [(s, 1.0)]  # absorbing sink; never stepped, kept for normalisation
        d = self._moves[a]
        branches = [(d, 1.0 - 2 * self.slip)]
        if self.slip > 0:
            branches += [((d[1], d[0]), self.slip), ((-d[1], -d[0]), self.slip)]
        merged: dict[int, float] = {}
        for direction, p in branches:
            s2 = self._move(s, direction)
            merged[s2] = merged.get(s2, 0.0) + p
        return sorted(merged.items())

    def transitions(self, s: int, a: int) -> list[tuple[int, float]]:
        return list(self._outcomes[int(s)][int(a)])

    def enumerate_kernel(self) -> list[tuple[int, int, int, float]]:
        return [
            (s, a, s2, p)
            for s in range(self.n_states)
            for a in range(self.n_actions)
            for s2, p in self._outcomes[s][a]
        ]

    # -- dynamics --------------------------------------------------------

    def step(self, s, a: int, rng: np.random.Generator) -> tuple[int, bool]:
        s = int(s)
        if self.holes[s]:
            raise TerminalStateError(f"state {self.cell(s)} is terminal")
        outcomes = self._outcomes[s][int(a)]
        if len(outcomes) == 1:
            s2 = outcomes[0][0]
        else:
            u = rng.random()
            acc = 0.0
            s2 = outcomes[-1][0]
            for cand, p in outcomes:
                acc += p
                if u < acc:
                    s2 = cand
                    break
        return s2, bool(self.holes[s2])

    def most_likely_next(self, s: int, a: int) -> int:
        # ties -> lowest state index (outcomes are sorted by index)
        outcomes = self._outcomes[int(s)][int(a)]
        return max(outcomes, key=lambda o: (o[1], -o[0]))[0]

    def goal_check_batch(self, S, G) -> np.ndarray:
        return np.asarray(S) == np.asarray(G)

    def goal_check(self, s, g) -> bool:
        return int(s) == int(g)

    def terminal_batch(self, S) -> np.ndarray:
        return self.holes[np.asarray(S, dtype=np.int64)]

    def initial_state(self, rng: np.random.Generator, mode: str = "train") -> int:
        if mode == "test" or self.train_start == "fixed":
            return self.start
        return int(self._safe[rng.integers(len(self._safe))])

    def sample_goal(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n_goals))

    def project(self, S) -> np.ndarray:
        return np.asarray(S, dtype=np.int64)

    def metric(self, S, G) -> np.ndarray:
        """L1 distance, ignoring walls and holes."""
        a = self.xy[np.asarray(S, dtype=np.int64)]
        b = self.xy[np.asarray(G, dtype=np.int64)]
        return np.abs(a - b).sum(axis=-1)

    def _sorted_goals(self):
        d = np.abs(self.xy[:, None, :] - self.xy[None, :, :]).sum(-1)
        order = np.argsort(d, axis=1, kind="stable")
        return order, np.take_along_axis(d, order, axis=1)

    def sample_goals_within(self, S, H, rng: np.random.Generator) -> np.ndarray:
        S = np.asarray(S, dtype=np.int64)
        H = np.asarray(H)
        counts = np.empty(len(S), dtype=np.int64)
        for i, (s, h) in enumerate(zip(S, H)):
            counts[i] = np.searchsorted(self._goal_dist[s], h, side="right")
        pick = np.minimum((rng.random(len(S)) * counts).astype(np.int64), counts - 1)
        return self._goal_order[S, pick]

    def encode_states(self, S) -> np.ndarray:
        return np.eye(self.n_states)[np.asarray(S, dtype=np.int64)]

    def encode_goals(self, G) -> np.ndarray:
        return np.eye(self.n_goals)[np.asarray(G, dtype=np.int64)]

    # -- evaluation goals ------------------------------------------------

    def shortest_paths(self, source: int) -> np.ndarray:
        """Step counts under the most likely move of each action (BFS); -1 if unreachable."""
        dist = np.full(self.n_states, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            s = queue.popleft()
            if self.holes[s]:
                continue
            for a in range(self.n_actions):
                s2 = self._move(s, self._moves[a])
                if dist[s2] < 0:
                    dist[s2] = dist[s] + 1
                    queue.append(s2)
        return dist

    def eval_goals(self) -> list[tuple[int, str]]:
        dist = self.shortest_paths(self.start)
        easy, medium = self.strata_thresholds
        goals = []
        for g in range(self.n_goals):
            if g == self.start or self.holes[g] or dist[g] < 0:
                continue
            tag = "easy" if dist[g] <= easy else "medium" if dist[g] <= medium else "hard"
            goals.append((g, tag))
        return goals


def grid_from_layout(name: str, kv: dict[str, str]) -> GridEnv:
    kv = dict(kv)
    kv.pop("kind", None)
    walls, holes = [], []
    start = test_goal = None
    if "map" in kv:
        rows = [r.strip() for r in kv.pop("map").split("/")]
        height, width = len(rows), len(rows[0])
        if any(len(r) != width for r in rows):
            raise ConfigError("map rows must have equal length")
        for j, row in enumerate(rows):
            y = height - 1 - j
            for x, ch in enumerate(row):
                if ch == "#":
                    walls.append((x, y))
                elif ch == "H":
                    holes.append((x, y))
                elif ch == "S":
                    start = (x, y)
                elif ch == "G":
                    test_goal = (x, y)
                elif ch != ".":
                    raise ConfigError(f"unknown map symbol {ch!r}")
        kv.setdefault("width", str(width))
        kv.setdefault("height", str(height))
    try:
        width = int(kv.pop("width"))
        height = int(kv.pop("height"))
    except KeyError as exc:
        raise ConfigError(f"grid layout missing {exc.args[0]!r}") from None
    walls += parse_cells(kv.pop("walls", ""))
    holes += parse_cells(kv.pop("holes", ""))
    if "start" in kv:
        start = parse_cells(kv.pop("start"))[0]
    if "test_goal" in kv:
        test_goal = parse_cells(kv.pop("test_goal"))[0]
    args = dict(
        actions=kv.pop("actions", "cardinal"),
        slip=float(kv.pop("slip", "0")),
        boundary=kv.pop("boundary", "clamp"),
        train_start=kv.pop("train_start", "uniform_safe"),
        max_episode_length=int(kv.pop("max_episode_length", "50")),
        strata=tuple(int(v) for v in kv.pop("strata", "4,8").split(",")),
    )
    if kv:
        raise ConfigError(f"unknown layout keys: {sorted(kv)}")
    layout = dict(width=width, height=height, walls=sorted(walls), holes=sorted(holes),
                  start=start or (0, 0), test_goal=test_goal, **args)
    return GridEnv(name, width, height, walls=walls, holes=holes, start=start or (0, 0),
                   test_goal=test_goal, layout=layout, **args)
