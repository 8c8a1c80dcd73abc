"""Training loop shared by the C, A, D and Q variants.

``train`` follows Algorithm 1: ``n_explore`` uniformly random episodes fill
the buffer, then every goal-directed episode is followed by ``n_train``
gradient steps on relabelled batches, refreshing the target snapshot every
``n_copy`` steps.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .approx import AccessFn, NonFiniteGradient, OptimState, apply_update
from .oracle import DEFAULT_GAMMAS
from .policy import HorizonSelectorConfig, epsilon_greedy, greedy_action, horizon_free_policy, uniform_policy
from .replay import Episode, HScheduleConfig, RelabelConfig, ReplayBuffer, make_targets
from .rng import split


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    variant: str = "C"
    backend: str = "tabular"
    hidden: tuple = (60, 40)
    n_explore: int = 15
    n_episodes: int = 300
    n_train: int = 64
    n_copy: int = 10
    batch_size: int = 256
    lr: float = 1e-3
    optimizer: str = "sgd"
    lr_decay_at: int = 0
    lr_decay_factor: float = 10.0
    epsilon: float = 0.1
    epsilon_schedule: str = "constant"
    epsilon_scale: float = 1000.0
    kappa: float = 3.0
    h_max: int = 50
    alpha: float = 0.9
    metric_floor: bool = False
    relabel: str = "future"
    clip: bool = False
    gamma: float = 0.99
    gamma_grid: tuple = DEFAULT_GAMMAS
    loss: str = "auto"
    max_episode_length: int = 0
    seed: int = 0

    def __post_init__(self):
        self.variant = self.variant.upper()
        if self.variant not in ("C", "A", "D", "Q"):
            raise ValueError(f"unknown variant {self.variant!r}")
        for name in ("n_train", "n_copy", "batch_size", "h_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("n_explore", "n_episodes", "lr_decay_at", "max_episode_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.variant == "Q" and self.gamma >= 1.0:
            raise ValueError("Q-learning needs gamma < 1")
        if self.epsilon_schedule not in ("constant", "inverse"):
            raise ValueError(f"unknown epsilon schedule {self.epsilon_schedule!r}")
        if self.loss not in ("auto", "bce", "squared"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        self.hidden = tuple(int(h) for h in self.hidden)
        self.gamma_grid = tuple(float(g) for g in self.gamma_grid)
        RelabelConfig(self.relabel, self.clip)
        OptimState(self.lr, self.optimizer)

    @property
    def loss_name(self) -> str:
        if self.loss != "auto":
            return self.loss
        return "squared" if self.variant == "Q" else "bce"

    def epsilon_at(self, n: int) -> float:
        if self.epsilon_schedule == "inverse":
            return self.epsilon / (1.0 + n / self.epsilon_scale)
        return self.epsilon

    def lr_at(self, n: int) -> float:
        if self.lr_decay_at and n >= self.lr_decay_at:
            return self.lr / self.lr_decay_factor
        return self.lr


@dataclass
class TrainReport:
    records: list = field(default_factory=list)
    wall_clock: float = 0.0
    batches: int = 0
    checkpoint: str | None = None
    buffer: ReplayBuffer | None = None

    def success_rate(self, last: int | None = None) -> float:
        recs = [r for r in self.records if r["success"] is not None]
        if last:
            recs = recs[-last:]
        return float(np.mean([r["success"] for r in recs])) if recs else float("nan")


class FixedCond:
    """View of an accessibility function at one fixed condition (D and Q)."""

    def __init__(self, fn, cond: float):
        self.fn = fn
        self.cond = cond

    def action_values(self, S, G, H):
        return self.fn.action_values(S, G, np.full(len(np.asarray(H)), self.cond))


def greedy_behavior(fn, cfg: TrainConfig, env):
    """Noise-free behaviour policy ``(s, g, rng) -> action`` for ``fn``."""
    if cfg.variant in ("C", "A"):
        sel = HorizonSelectorConfig(cfg.alpha, cfg.h_max, metric_floor=cfg.metric_floor)
        return horizon_free_policy(fn, sel, env)
    cond = 0.0
    if cfg.variant == "D":
        cond = cfg.gamma
        if fn.backend == "tabular":
            # tables only hold the grid; act on the nearest discount
            cond = float(fn.gammas[np.abs(np.asarray(fn.gammas) - cfg.gamma).argmin()])
    view = FixedCond(fn, cond)
    return lambda s, g, rng=None: greedy_action(view, s, g, 1)


def behavior_rollout(env, policy, goal, rng: np.random.Generator, *, s0=None,
                     max_len: int | None = None, stop_at_goal: bool = True, index: int = 0) -> Episode:
    """Run ``policy`` until the goal, a terminal state or the step limit."""
    max_len = env.max_episode_length if max_len is None else max_len
    s = env.initial_state(rng, "train") if s0 is None else s0
    states, actions = [s], []
    terminal = success = False
    for _ in range(max_len + 1):
        if stop_at_goal and env.goal_check(s, goal):
            success = True
            break
        if len(actions) == max_len:
            break
        a = policy(s, goal, rng)
        s, terminal = env.step(s, a, rng)
        states.append(s)
        actions.append(a)
        if terminal:
            break
    return Episode(np.asarray(states), np.asarray(actions, dtype=np.int64), goal, terminal, index, success)


def build_fn(env, cfg: TrainConfig, rng=None) -> AccessFn:
    return AccessFn(env, cfg.variant, cfg.backend, h_max=cfg.h_max, hidden=cfg.hidden,
                    gammas=cfg.gamma_grid if cfg.variant == "D" else None, rng=rng, seed=cfg.seed)


def _conditions(cfg: TrainConfig, fn: AccessFn, sched: HScheduleConfig, n: int, rng) -> np.ndarray | None:
    B = cfg.batch_size
    if cfg.variant in ("C", "A"):
        return sched.sample(n, B, rng)
    if cfg.variant == "D":
        if fn.backend == "tabular":
            return np.asarray(cfg.gamma_grid)[rng.integers(len(cfg.gamma_grid), size=B)]
        return rng.random(B)
    return None


def train(env, cfg: TrainConfig, *, replay_episodes=None, metrics_path=None, checkpoint_path=None,
          log=None) -> tuple[AccessFn, TrainReport]:
    """Train an accessibility function on ``env``.

    With ``replay_episodes`` the buffer is filled from the given episodes and
    no environment interaction happens; each of the ``n_episodes`` rounds
    then only performs its ``n_train`` gradient steps.
    """
    streams = split(cfg.seed, ["init", "explore", "rollout", "sample"])
    fn = build_fn(env, cfg, streams["init"])
    opt = OptimState(cfg.lr, cfg.optimizer)
    relabel = RelabelConfig(cfg.relabel, cfg.clip)
    sched = HScheduleConfig(cfg.kappa, cfg.h_max, max(cfg.n_episodes, 1))
    buffer = ReplayBuffer(env)
    max_len = cfg.max_episode_length or env.max_episode_length
    report = TrainReport()
    start = time.perf_counter()
    metrics = open(metrics_path, "w") if metrics_path else None

    offline = replay_episodes is not None
    if offline:
        for ep in replay_episodes:
            buffer.append(ep)
    else:
        explore = uniform_policy(env.n_actions)
        r = streams["explore"]
        for i in range(cfg.n_explore):
            g = env.sample_goal(r)
            buffer.append(behavior_rollout(env, explore, g, r, max_len=max_len, stop_at_goal=False, index=i))

    target = fn.copy_to_target()
    batches = 0
    try:
        for n in range(cfg.n_episodes):
            eps = cfg.epsilon_at(n)
            record = {"episode": n, "epsilon": eps, "lr": cfg.lr_at(n), "success": None, "length": None}
            if not offline:
                r = streams["rollout"]
                g = env.sample_goal(r)
                policy = epsilon_greedy(greedy_behavior(fn, cfg, env), eps, env.n_actions)
                ep = behavior_rollout(env, policy, g, r, max_len=max_len, index=cfg.n_explore + n)
                buffer.append(ep)
                record.update(success=bool(ep.success), length=len(ep))
            opt.lr = cfg.lr_at(n)
            losses = []
            for _ in range(cfg.n_train):
                if batches % cfg.n_copy == 0:
                    target = fn.copy_to_target()
                rs = streams["sample"]
                cond = _conditions(cfg, fn, sched, n, rs)
                batch = buffer.sample_batch(cfg.batch_size, rs, cond if cfg.variant in ("C", "A") else None, relabel)
                y = make_targets(batch, target, relabel, env, cfg.variant,
                                 cond if cfg.variant == "D" else cfg.gamma)
                K = batch.H if cfg.variant in ("C", "A") else (cond if cfg.variant == "D" else np.zeros(len(y)))
                loss, grads = fn.loss_and_grad(batch.S, batch.A, batch.G, K, y, cfg.loss_name)
                if not np.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at episode {n}, batch {batches}")
                apply_update(fn.params, grads, opt)
                losses.append(float(loss))
                batches += 1
            fn.step = batches
            record["loss"] = float(np.mean(losses)) if losses else None
            report.records.append(record)
            if metrics:
                metrics.write(json.dumps(record) + "\n")
            if log and (n + 1) % max(1, cfg.n_episodes // 10) == 0:
                log(f"episode {n + 1}/{cfg.n_episodes} loss={record['loss']:.4f} "
                    f"success(last 50)={report.success_rate(50):.2f}")
    except NonFiniteGradient as exc:
        raise TrainingDiverged(str(exc)) from None
    finally:
        if metrics:
            metrics.close()
    report.batches = batches
    report.wall_clock = time.perf_counter() - start
    report.buffer = buffer
    if checkpoint_path:
        fn.save(checkpoint_path)
        report.checkpoint = str(checkpoint_path)
    return fn, report


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
