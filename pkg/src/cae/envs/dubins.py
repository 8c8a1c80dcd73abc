"""Dubins' car: a non-holonomic car on a square arena with thin walls.

State is ``(x, y, heading_deg)``; a goal is a position and counts as reached
when the car is within L-infinity distance ``goal_radius`` of it. Each action
turns the car by at most ``turn_deg`` and then moves it one unit forwards or
backwards along the new heading; the seventh action does nothing. A move that
would cross a wall or leave the arena keeps the old position, but the heading
change still applies.
"""

from __future__ import annotations

import math

import numpy as np

from ..kv import ConfigError, parse_points
from .base import Env, EnvSpec, TerminalStateError

TURNS = (1, 0, -1)  # left (counter-clockwise), straight, right
DRIVE = (1, -1)     # forward, reverse


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, cx, cy) -> bool:
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def segments_intersect(p, q, a, b) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = _orient(*a, *b, *p)
    d2 = _orient(*a, *b, *q)
    d3 = _orient(*p, *q, *a)
    d4 = _orient(*p, *q, *b)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return ((d1 == 0 and _on_segment(*a, *b, *p)) or (d2 == 0 and _on_segment(*a, *b, *q))
            or (d3 == 0 and _on_segment(*p, *q, *a)) or (d4 == 0 and _on_segment(*p, *q, *b)))


class DubinsCar(Env):
    state_dtype = np.float64
    goal_dtype = np.float64

    def __init__(
        self,
        name: str = "dubins",
        size: float = 15.0,
        *,
        turn_deg: float = 10.0,
        walls=(),
        start=(1.0, 14.0, 0.0),
        goal_radius: float = 0.5,
        max_episode_length: int = 100,
        eval_goals: dict[str, list] | None = None,
        layout: dict | None = None,
    ):
        self.size = float(size)
        self.turn_deg = float(turn_deg)
        self.walls = [tuple(map(float, w)) for w in walls]
        self.start = np.array([start[0], start[1], start[2] % 360.0], dtype=float)
        self.goal_radius = float(goal_radius)
        self._eval = eval_goals or {}
        names = [f"{t}-{d}" for d in ("fwd", "rev") for t in ("left", "straight", "right")]
        self.action_names = names + ["noop"]
        self._actions = [(t, d) for d in DRIVE for t in TURNS] + [(0, 0)]
        self.spec = EnvSpec(
            name=name,
            action_count=7,
            state_bounds=((0.0, self.size), (0.0, self.size), (0.0, 360.0)),
            goal_bounds=((0.0, self.size), (0.0, self.size)),
            max_episode_length=int(max_episode_length),
            stochastic=False,
            layout=dict(layout or {}),
        )

    @property
    def state_shape(self) -> tuple:
        return (3,)

    @property
    def goal_shape(self) -> tuple:
        return (2,)

    def blocked(self, p, q) -> bool:
        if not (0.0 <= q[0] <= self.size and 0.0 <= q[1] <= self.size):
            return True
        return any(segments_intersect(p, q, w[:2], w[2:]) for w in self.walls)

    def step(self, s, a: int, rng: np.random.Generator | None = None) -> tuple[np.ndarray, bool]:
        x, y, heading = (float(v) for v in s)
        turn, drive = self._actions[int(a)]
        heading = (heading + turn * self.turn_deg) % 360.0
        if drive:
            rad = math.radians(heading)
            nx, ny = x + drive * math.cos(rad), y + drive * math.sin(rad)
            if not self.blocked((x, y), (nx, ny)):
                x, y = nx, ny
        return np.array([x, y, heading]), False

    def goal_check_batch(self, S, G) -> np.ndarray:
        S = np.atleast_2d(S)
        G = np.atleast_2d(G)
        return np.abs(S[:, :2] - G[:, :2]).max(axis=1) <= self.goal_radius

    def initial_state(self, rng: np.random.Generator, mode: str = "train") -> np.ndarray:
        return self.start.copy()

    def sample_goal(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(2) * self.size

    def project(self, S) -> np.ndarray:
        return np.atleast_2d(S)[:, :2].copy()

    def metric(self, S, G) -> np.ndarray:
        """L-infinity position distance, ignoring walls."""
        return np.abs(np.atleast_2d(S)[:, :2] - np.atleast_2d(G)[:, :2]).max(axis=1)

    def sample_goals_within(self, S, H, rng: np.random.Generator) -> np.ndarray:
        P = np.atleast_2d(S)[:, :2]
        H = np.asarray(H, dtype=float)[:, None]
        lo = np.clip(P - H, 0.0, self.size)
        hi = np.clip(P + H, 0.0, self.size)
        return lo + rng.random(P.shape) * (hi - lo)

    def encode_states(self, S) -> np.ndarray:
        S = np.atleast_2d(S)
        rad = np.radians(S[:, 2])
        return np.column_stack([S[:, 0] / self.size, S[:, 1] / self.size, np.cos(rad), np.sin(rad)])

    def encode_goals(self, G) -> np.ndarray:
        return np.atleast_2d(G)[:, :2] / self.size

    def eval_goals(self) -> list[tuple[np.ndarray, str]]:
        return [(np.array(g, dtype=float), tag) for tag in ("easy", "medium", "hard")
                for g in self._eval.get(tag, [])]

    def describe_state(self, s) -> str:
        return "({:.2f}, {:.2f}, {:.0f})".format(*s)


class DiscretizedDubins(Env):
    """Enumerable approximation of a car: positions snapped to a lattice.

    Position grid spacing ``resolution`` and ``round(360 / turn_deg)``
    headings. Used only for qualitative cross-checks of learned reachability.
    """

    enumerable = True

    def __init__(self, car: DubinsCar, resolution: float = 0.5):
        self.car = car
        self.res = float(resolution)
        self.n_side = int(round(car.size / self.res)) + 1
        self.n_head = int(round(360.0 / car.turn_deg))
        if not math.isclose(self.n_head * car.turn_deg, 360.0):
            raise ConfigError("turn angle must divide 360 for discretisation")
        self.n_states = self.n_side * self.n_side * self.n_head
        self.n_goals = self.n_side * self.n_side
        self.action_names = list(car.action_names)
        self.spec = EnvSpec(
            name=car.spec.name + "-discrete",
            action_count=car.n_actions,
            state_bounds=car.spec.state_bounds,
            goal_bounds=car.spec.goal_bounds,
            max_episode_length=car.max_episode_length,
            stochastic=False,
            n_states=self.n_states,
            layout=dict(car.spec.layout, resolution=self.res),
        )
        self._next = self._build()

    def state_of(self, s: int) -> np.ndarray:
        ix, rest = divmod(int(s), self.n_side * self.n_head)
        iy, ih = divmod(rest, self.n_head)
        return np.array([ix * self.res, iy * self.res, ih * self.car.turn_deg])

    def index_of(self, state) -> int:
        ix = int(round(state[0] / self.res))
        iy = int(round(state[1] / self.res))
        ih = int(round((state[2] % 360.0) / self.car.turn_deg)) % self.n_head
        ix = min(max(ix, 0), self.n_side - 1)
        iy = min(max(iy, 0), self.n_side - 1)
        return (ix * self.n_side + iy) * self.n_head + ih

    def goal_index(self, g) -> int:
        ix = min(max(int(round(g[0] / self.res)), 0), self.n_side - 1)
        iy = min(max(int(round(g[1] / self.res)), 0), self.n_side - 1)
        return ix * self.n_side + iy

    def goal_position(self, g: int) -> np.ndarray:
        ix, iy = divmod(int(g), self.n_side)
        return np.array([ix * self.res, iy * self.res])

    def _build(self) -> np.ndarray:
        nxt = np.empty((self.n_states, self.n_actions), dtype=np.int64)
        for s in range(self.n_states):
            st = self.state_of(s)
            for a in range(self.n_actions):
                nxt[s, a] = self.index_of(self.car.step(st, a)[0])
        return nxt

    def enumerate_kernel(self):
        return [(s, a, int(self._next[s, a]), 1.0)
                for s in range(self.n_states) for a in range(self.n_actions)]

    def step(self, s, a, rng=None):
        return int(self._next[int(s), int(a)]), False

    def _positions(self, S):
        S = np.asarray(S, dtype=np.int64)
        return np.column_stack([S // (self.n_side * self.n_head), (S // self.n_head) % self.n_side])

    def _goal_cells(self, G):
        G = np.asarray(G, dtype=np.int64)
        return np.column_stack([G // self.n_side, G % self.n_side])

    def goal_check_batch(self, S, G):
        d = np.abs(self._positions(S) - self._goal_cells(G)).max(axis=1) * self.res
        return d <= self.car.goal_radius

    def goal_check(self, s, g) -> bool:
        return bool(self.goal_check_batch([s], [g])[0])

    def initial_state(self, rng, mode="train"):
        return self.index_of(self.car.start)

    def sample_goal(self, rng):
        return int(rng.integers(self.n_goals))

    def project(self, S):
        P = self._positions(S)
        return P[:, 0] * self.n_side + P[:, 1]

    def metric(self, S, G):
        return np.abs(self._positions(S) - self._goal_cells(G)).max(axis=1) * self.res

    def sample_goals_within(self, S, H, rng):
        raise NotImplementedError("discretised car is oracle-only")

    def encode_states(self, S):
        raise NotImplementedError("discretised car is oracle-only")

    def encode_goals(self, G):
        raise NotImplementedError("discretised car is oracle-only")

    def eval_goals(self):
        return [(self.goal_index(g), tag) for g, tag in self.car.eval_goals()]


def dubins_from_layout(name: str, kv: dict[str, str]) -> DubinsCar:
    kv = dict(kv)
    kv.pop("kind", None)
    walls = [w for w in parse_points(kv.pop("walls", "")) if w]
    for w in walls:
        if len(w) != 4:
            raise ConfigError(f"wall segment needs 4 numbers, got {w}")
    start = parse_points(kv.pop("start", "1,14,0"))[0]
    eval_goals = {}
    for tag in ("easy", "medium", "hard"):
        eval_goals[tag] = [p for p in parse_points(kv.pop(f"goals.{tag}", ""))]
    args = dict(
        size=float(kv.pop("size", "15")),
        turn_deg=float(kv.pop("turn_deg", "10")),
        goal_radius=float(kv.pop("goal_radius", "0.5")),
        max_episode_length=int(kv.pop("max_episode_length", "100")),
    )
    if kv:
        raise ConfigError(f"unknown layout keys: {sorted(kv)}")
    layout = dict(walls=walls, start=start, eval_goals=eval_goals, **args)
    return DubinsCar(name, walls=walls, start=start, eval_goals=eval_goals, layout=layout, **args)
