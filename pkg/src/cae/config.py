"""Run configuration: environment presets plus flat ``section.key = value`` files.

Sections are ``env.``, ``train.``, ``policy.`` and ``eval.``. Unknown keys
are rejected. ``to_kv`` and ``from_kv`` round-trip exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .kv import ConfigError, dump_kv, load_kv, parse_bool, parse_kv
from .learner import TrainConfig

POLICY_KEYS = ("alpha", "metric_floor")


@dataclass
class EvalConfig:
    trials: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1 or self.threads < 1:
            raise ConfigError("eval.trials and eval.threads must be >= 1")


@dataclass
class RunConfig:
    env: str = "frozen-lake"
    layout: str = ""
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_kv(self) -> dict:
        out = {"env.name": self.env, "env.layout": self.layout}
        for f in dataclasses.fields(TrainConfig):
            section = "policy" if f.name in POLICY_KEYS else "train"
            out[f"{section}.{f.name}"] = getattr(self.train, f.name)
        for f in dataclasses.fields(EvalConfig):
            out[f"eval.{f.name}"] = getattr(self.eval, f.name)
        return out

    def dumps(self) -> str:
        return dump_kv(self.to_kv())


# Neural budgets for the larger environments; the small ones get quick tabular defaults.
PRESETS: dict[str, dict] = {
    "frozen-lake": dict(backend="mlp", hidden=(60, 40), n_explore=15, n_episodes=300, n_train=64,
                        batch_size=256, lr=1e-3, optimizer="adam", epsilon=0.1, kappa=3.0, n_copy=10,
                        h_max=50, alpha=0.9, relabel="reachability", clip=True),
    "mini-maze": dict(backend="mlp", hidden=(200, 100), n_explore=15, n_episodes=3000, n_train=32,
                      batch_size=256, lr=1e-3, optimizer="adam", lr_decay_at=2000, epsilon=0.5,
                      epsilon_schedule="inverse", epsilon_scale=1000.0, h_max=50, alpha=0.9,
                      relabel="reachability", clip=True, metric_floor=True),
    "dubins": dict(backend="mlp", hidden=(400, 300), n_explore=15, n_episodes=4500, n_train=80,
                   batch_size=256, lr=1e-3, optimizer="adam", epsilon=0.1, h_max=50, alpha=0.9,
                   relabel="reachability", clip=True),
    "dubins-small": dict(backend="mlp", hidden=(200, 100), n_explore=15, n_episodes=2000, n_train=80,
                         batch_size=256, lr=1e-3, optimizer="adam", epsilon=0.1, h_max=50, alpha=0.9,
                         relabel="reachability", clip=True),
    "dubins-open5": dict(backend="mlp", hidden=(200, 100), n_explore=15, n_episodes=1000, n_train=80,
                         batch_size=256, lr=1e-3, optimizer="adam", epsilon=0.1, h_max=30, alpha=0.9,
                         relabel="reachability", clip=True),
    "line-world": dict(backend="tabular", n_explore=20, n_episodes=100, n_train=20, batch_size=64,
                       lr=20.0, h_max=5, relabel="future"),
    "checkerboard": dict(backend="tabular", n_explore=20, n_episodes=200, n_train=32, batch_size=128,
                         lr=40.0, h_max=20, relabel="future"),
    "open-grid": dict(backend="tabular", n_explore=20, n_episodes=200, n_train=32, batch_size=128,
                      lr=40.0, h_max=15, relabel="future"),
}


def preset(env: str, variant: str = "C", seed: int = 0) -> RunConfig:
    base = dict(PRESETS.get(env, {}))
    base.update(variant=variant.upper(), seed=seed)
    return RunConfig(env=env, train=TrainConfig(**base))


def _coerce(value: str, default, key: str):
    try:
        if isinstance(default, bool):
            return parse_bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            items = [v for v in value.split(",") if v.strip()]
            kind = int if default and isinstance(default[0], int) else float
            return tuple(kind(v) for v in items)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return value


def apply_kv(cfg: RunConfig, kv: dict[str, str]) -> RunConfig:
    """Overlay string values onto ``cfg``; unknown keys raise ``ConfigError``."""
    train = dataclasses.asdict(cfg.train)
    ev = dataclasses.asdict(cfg.eval)
    env, layout = cfg.env, cfg.layout
    for key, value in kv.items():
        section, _, name = key.partition(".")
        if section == "env" and name in ("name", "layout"):
            if name == "name":
                env = value
            else:
                layout = value
        elif (section == "train" and name in train and name not in POLICY_KEYS) or \
                (section == "policy" and name in POLICY_KEYS):
            train[name] = _coerce(value, train[name], key)
        elif section == "eval" and name in ev:
            ev[name] = _coerce(value, ev[name], key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return RunConfig(env=env, layout=layout, train=TrainConfig(**train), eval=EvalConfig(**ev))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def from_kv(kv: dict[str, str]) -> RunConfig:
    return apply_kv(RunConfig(), kv)


def loads(text: str) -> RunConfig:
    return from_kv(parse_kv(text))


def load_run_config(env: str | None, variant: str | None, seed: int | None, path=None,
                    overrides=()) -> RunConfig:
    """Preset for ``env``, then the config file, then ``key=value`` overrides,
    then explicit command-line values."""
    file_kv = load_kv(path) if path else {}
    env_name = env or file_kv.get("env.name") or "frozen-lake"
    cfg = preset(env_name)
    cfg = apply_kv(cfg, file_kv)
    extra = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        extra[k.strip()] = v.strip()
    cfg = apply_kv(cfg, extra)
    final = {}
    if env:
        final["env.name"] = env
    if variant:
        final["train.variant"] = variant
    if seed is not None:
        final["train.seed"] = str(seed)
    return apply_kv(cfg, final)
