"""Environment registry.

Built-in layouts ship as ``key = value`` files next to this module; any
environment can also be built from a user-supplied layout file.
"""

from __future__ import annotations

from pathlib import Path

from ..kv import ConfigError, load_kv
from .base import Env, EnvSpec, NotEnumerableError, TerminalStateError
from .dubins import DiscretizedDubins, DubinsCar, dubins_from_layout
from .grid import GridEnv, grid_from_layout

LAYOUT_DIR = Path(__file__).parent / "layouts"

BUILTIN = {
    "frozen-lake": "frozen_lake.cfg",
    "mini-maze": "mini_maze.cfg",
    "line-world": "line_world.cfg",
    "checkerboard": "checkerboard.cfg",
    "open-grid": "open_grid.cfg",
    "dubins": "dubins.cfg",
    "dubins-small": "dubins_small.cfg",
    "dubins-open5": "dubins_open5.cfg",
}


def from_layout(name: str, kv: dict[str, str]) -> Env:
    kind = kv.get("kind", "grid")
    if kind == "grid":
        return grid_from_layout(name, kv)
    if kind == "dubins":
        return dubins_from_layout(name, kv)
    raise ConfigError(f"unknown environment kind {kind!r}")


def make_env(name: str, layout: str | Path | None = None) -> Env:
    if layout is None:
        if name not in BUILTIN:
            raise ConfigError(f"unknown environment {name!r}; choose from {sorted(BUILTIN)}")
        layout = LAYOUT_DIR / BUILTIN[name]
    return from_layout(name, load_kv(layout))


__all__ = [
    "BUILTIN", "DiscretizedDubins", "DubinsCar", "Env", "EnvSpec", "GridEnv",
    "NotEnumerableError", "TerminalStateError", "make_env", "from_layout",
]
