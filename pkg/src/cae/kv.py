"""Flat ``key = value`` text files.

Used for both environment layouts and run configs. Blank lines and ``#``
comments are ignored (inline comments need whitespace before the ``#``, so map
rows may use ``#`` for walls); a key may appear only once. Values are kept as strings
and converted by the caller.
"""

from __future__ import annotations

import re
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.split(r"(?:^|\s)#", raw, maxsplit=1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_kv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse_kv(path.read_text(), str(path))


def dump_kv(values: dict[str, object]) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(values.items()))


def _fmt(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_points(value: str) -> list[tuple[float, ...]]:
    """``"1,2 3,4"`` -> ``[(1.0, 2.0), (3.0, 4.0)]``; ``;`` also separates points."""
    pts = []
    for tok in value.replace(";", " ").split():
        pts.append(tuple(float(x) for x in tok.split(",")))
    return pts


def parse_cells(value: str) -> list[tuple[int, int]]:
    cells = []
    for p in parse_points(value):
        if len(p) != 2 or any(c != int(c) for c in p):
            raise ConfigError(f"bad grid cell {p!r}")
        cells.append((int(p[0]), int(p[1])))
    return cells
