"""Rollout evaluation, difficulty strata, seed aggregation and heatmaps."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

STRATA = ("easy", "medium", "hard")


@dataclass
class GoalRecord:
    goal: list
    tag: str
    successes: int
    trials: int
    mean_path_length: float | None
    mean_final_distance: float

    @property
    def success_rate(self) -> float:
        return 100.0 * self.successes / self.trials


@dataclass
class EvalReport:
    env: str
    trials: int
    seed: int
    records: list[GoalRecord] = field(default_factory=list)

    def _agg(self, recs) -> dict:
        trials = sum(r.trials for r in recs)
        wins = sum(r.successes for r in recs)
        lengths = [r.mean_path_length * r.successes for r in recs if r.successes]
        return {
            "goals": len(recs),
            "trials": trials,
            "success_rate": 100.0 * wins / trials if trials else None,
            "mean_path_length": sum(lengths) / wins if wins else None,
            "mean_final_distance": float(np.mean([r.mean_final_distance for r in recs])) if recs else None,
        }

    def strata(self) -> dict:
        return {tag: self._agg([r for r in self.records if r.tag == tag])
                for tag in STRATA if any(r.tag == tag for r in self.records)}

    def overall(self) -> dict:
        return self._agg(self.records)

    @property
    def success_rate(self) -> float:
        return self.overall()["success_rate"]

    def to_dict(self) -> dict:
        return {"env": self.env, "trials": self.trials, "seed": self.seed,
                "overall": self.overall(), "strata": self.strata(),
                "goals": [dict(asdict(r), success_rate=r.success_rate) for r in self.records]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["goal", "tag", "successes", "trials", "success_rate", "mean_path_length",
                        "mean_final_distance"])
            for r in self.records:
                w.writerow([" ".join(str(v) for v in np.atleast_1d(r.goal)), r.tag, r.successes, r.trials,
                            r.success_rate, "" if r.mean_path_length is None else r.mean_path_length,
                            r.mean_final_distance])


def rollout(env, policy, goal, rng, max_len: int | None = None, mode: str = "test"):
    """One evaluation episode; returns ``(success, steps, final_state, trace)``."""
    max_len = env.max_episode_length if max_len is None else max_len
    s = env.initial_state(rng, mode)
    trace = [(s, None)]
    for t in range(max_len + 1):
        if env.goal_check(s, goal):
            return True, t, s, trace
        if t == max_len:
            break
        a = policy(s, goal, rng)
        s, terminal = env.step(s, a, rng)
        trace[-1] = (trace[-1][0], a)
        trace.append((s, None))
        if terminal:
            break
    return False, len(trace) - 1, s, trace


def _eval_goal(env, policy, goal, tag, trials, seed_seq) -> GoalRecord:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    lengths, dists, wins = [], [], 0
    for _ in range(trials):
        ok, steps, final, _ = rollout(env, policy, goal, rng)
        dists.append(float(env.metric(np.asarray([final]), np.asarray([goal]))[0]))
        if ok:
            wins += 1
            lengths.append(steps)
    return GoalRecord(np.asarray(goal).tolist(), tag, wins, trials,
                      float(np.mean(lengths)) if lengths else None, float(np.mean(dists)))


def evaluate(env, policy, goals=None, trials: int = 100, seed: int = 0, threads: int = 1) -> EvalReport:
    """Success rate per goal from the environment's test start.

    Every goal gets its own random stream derived from ``seed``, so results
    do not depend on ``threads``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    goals = env.eval_goals() if goals is None else goals
    seqs = np.random.SeedSequence(seed).spawn(len(goals))
    jobs = [(g, tag, seqs[i]) for i, (g, tag) in enumerate(goals)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda j: _eval_goal(env, policy, j[0], j[1], trials, j[2]), jobs))
    else:
        records = [_eval_goal(env, policy, g, tag, trials, ss) for g, tag, ss in jobs]
    return EvalReport(env.spec.name, trials, seed, records)


def aggregate_seeds(reports: list[EvalReport]) -> dict:
    """Mean and standard deviation of success rates across seeds, per stratum."""
    out = {}
    keys = ["overall"] + [t for t in STRATA if any(t in r.strata() for r in reports)]
    for key in keys:
        rates = [(r.overall() if key == "overall" else r.strata().get(key, {})).get("success_rate")
                 for r in reports]
        rates = [x for x in rates if x is not None]
        out[key] = {"mean": float(np.mean(rates)), "std": float(np.std(rates)), "seeds": len(rates)}
    return out


def heatmap(fn, env, s, h, resolution: float = 0.5) -> np.ndarray:
    """``max_a fn(s, a, g, h)`` over a goal grid.

    Grid worlds give a ``(height, width)`` matrix with NaN at walls; the car
    gives a square matrix over goal positions spaced ``resolution`` apart,
    row 0 at ``y = 0``.
    """
    predict = getattr(fn, "predict", None) or fn.action_values
    if getattr(env, "enumerable", False) and hasattr(env, "xy"):
        G = np.arange(env.n_goals)
        S = np.full(len(G), s)
        vals = predict(S, G, np.full(len(G), h)).max(axis=1)
        out = np.full((env.height, env.width), np.nan)
        out[env.xy[:, 1], env.xy[:, 0]] = vals
        return out
    ticks = np.arange(0.0, env.size + 1e-9, resolution)
    gx, gy = np.meshgrid(ticks, ticks)
    G = np.column_stack([gx.ravel(), gy.ravel()])
    S = np.repeat(np.asarray(s, dtype=float)[None], len(G), axis=0)
    vals = predict(S, G, np.full(len(G), h)).max(axis=1)
    return vals.reshape(len(ticks), len(ticks))


def write_matrix_csv(path, M: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def write_trajectory_csv(path, env, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        fields = ["x", "y"] if hasattr(env, "cell") else ["x", "y", "heading"]
        w.writerow(["t", *fields, "action"])
        for t, (s, a) in enumerate(trace):
            cols = env.cell(s) if hasattr(env, "cell") else np.atleast_1d(s).tolist()
            w.writerow([t, *cols, "" if a is None else a])
