"""Command-line front end: ``cae {train,eval,oracle,compare,plot}``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
runtime failures. Every output directory gets a ``manifest.json`` listing
the command, configuration, seed, environment hash and produced files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .approx import AccessFn
from .config import load_run_config
from .envs import make_env
from .envs.base import NotEnumerableError
from .envs.dubins import DiscretizedDubins
from .evaluation import evaluate, heatmap, rollout, write_matrix_csv, write_trajectory_csv
from .kv import ConfigError
from .learner import TrainingDiverged, greedy_behavior, train
from .oracle import (MdpSpec, compute_a_star, compute_c_star, compute_d_star, compute_q_star,
                     min_horizon, monotonicity_violation)
from .policy import most_likely_trajectory
from .replay import dump_episodes, load_episodes
from . import svg

log = logging.getLogger("cae")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, argv, cfg=None, env=None, seed=None) -> Path:
    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "command": ["cae", *argv],
        "version": __version__,
        "seed": seed,
        "config": cfg.dumps() if cfg is not None else None,
        "env_spec_sha256": env.spec.digest() if env is not None else None,
        "env_spec": json.loads(env.spec.to_json()) if env is not None else None,
        "files": [{"name": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)} for p in files],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _out_dir(args, seed) -> Path:
    out = Path(args.out) if args.out else Path("runs") / f"{time.strftime('%Y%m%d-%H%M%S')}-{seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    overrides = list(args.set or [])
    if getattr(args, "h_max", None) is not None:
        overrides.append(f"train.h_max={args.h_max}")
    if getattr(args, "alpha", None) is not None:
        overrides.append(f"policy.alpha={args.alpha}")
    return load_run_config(args.env, getattr(args, "variant", None), args.seed, args.config, overrides)


def _env(cfg):
    return make_env(cfg.env, cfg.layout or None)


def _run_dir_config(args):
    """Config for commands that consume a checkpoint: prefer the run's own snapshot."""
    if args.checkpoint and not args.config:
        snap = Path(args.checkpoint).parent / "config.cfg"
        if snap.exists():
            args.config = str(snap)
    return _config(args)


# -- commands --------------------------------------------------------------


def cmd_train(args, argv) -> int:
    cfg = _config(args)
    env = _env(cfg)
    out = _out_dir(args, cfg.train.seed)
    (out / "config.cfg").write_text(cfg.dumps())
    episodes = None
    if args.replay_in:
        episodes = load_episodes(args.replay_in, env.state_dtype)
    fn, report = train(env, cfg.train, replay_episodes=episodes, metrics_path=out / "metrics.jsonl",
                       checkpoint_path=out / "checkpoint.json", log=log.info)
    dump_episodes(out / "episodes.jsonl", report.buffer.episodes)
    write_manifest(out, argv, cfg, env, cfg.train.seed)
    print(f"run directory: {out}")
    print(f"batches: {report.batches}  wall clock: {report.wall_clock:.1f}s  "
          f"train success (last 50): {report.success_rate(50):.3f}")
    return 0


def _load_fn(args, env):
    if not args.checkpoint:
        raise UsageError("--checkpoint is required")
    return AccessFn.load(env, args.checkpoint)


def cmd_eval(args, argv) -> int:
    cfg = _run_dir_config(args)
    env = _env(cfg)
    fn = _load_fn(args, env)
    cfg.train.variant = fn.variant
    threads = args.threads or cfg.eval.threads
    report = evaluate(env, greedy_behavior(fn, cfg.train, env), trials=cfg.eval.trials,
                      seed=cfg.train.seed, threads=threads)
    out = _out_dir(args, cfg.train.seed)
    report.write_json(out / "eval.json")
    report.write_csv(out / "eval.csv")
    write_manifest(out, argv, cfg, env, cfg.train.seed)
    o = report.overall()
    print(f"success rate: {o['success_rate']:.2f}% over {o['goals']} goals x {report.trials} trials")
    for tag, agg in report.strata().items():
        print(f"  {tag}: {agg['success_rate']:.2f}%")
    return 0


def _oracle_env(args, cfg):
    env = _env(cfg)
    if getattr(env, "enumerable", False):
        return env
    if not args.discretize:
        raise UsageError(f"{cfg.env} is not enumerable; pass --discretize to use the lattice approximation")
    return DiscretizedDubins(env, args.resolution)


def cmd_oracle(args, argv) -> int:
    cfg = _config(args)
    env = _oracle_env(args, cfg)
    mdp = MdpSpec.from_env(env)
    variant = (args.variant or "c").upper()
    h_max = args.h_max if args.h_max is not None else 10
    threads = args.threads or 1
    if variant == "C":
        table = compute_c_star(mdp, h_max, threads)
    elif variant == "A":
        table = compute_a_star(mdp, h_max, threads)
    elif variant == "D":
        table = compute_d_star(mdp)
    elif variant == "Q":
        table = compute_q_star(mdp, args.gamma)
    else:
        raise UsageError(f"unknown variant {variant!r}")
    out = _out_dir(args, cfg.train.seed)
    rows = table.to_csv(out / "table.csv")
    summary = {"variant": variant, "rows": rows, "deterministic": mdp.deterministic}
    if variant == "C":
        tol = 1e-12
        summary["max_monotonicity_violation"] = monotonicity_violation(table)
        summary["violations"] = int((np.diff(table.values, axis=-1) < -tol).sum())
        if mdp.deterministic:
            s0 = env.initial_state(np.random.default_rng(0), "test")
            summary["min_horizon_from_start"] = {str(g): min_horizon(table, s0, g) for g in mdp.goals.tolist()}
    if variant == "D":
        summary["converged"] = table.converged.tolist()
        summary["iterations"] = table.extra["iterations"]
        summary["violations"] = int((np.diff(table.values, axis=-1) < -1e-12).sum())
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_manifest(out, argv, cfg, env, cfg.train.seed)
    print(f"rows: {rows}")
    if "violations" in summary:
        print(f"violations: {summary['violations']}")
    return 0


def cmd_compare(args, argv) -> int:
    variants = [v.strip().upper() for v in (args.variants or "c,a,d").split(",") if v.strip()]
    out = _out_dir(args, args.seed or 0)
    rows = []
    for v in variants:
        args.variant = v
        cfg = _config(args)
        env = _env(cfg)
        sub = out / v.lower()
        sub.mkdir(exist_ok=True)
        (sub / "config.cfg").write_text(cfg.dumps())
        fn, rep = train(env, cfg.train, metrics_path=sub / "metrics.jsonl",
                        checkpoint_path=sub / "checkpoint.json", log=log.info)
        report = evaluate(env, greedy_behavior(fn, cfg.train, env), trials=cfg.eval.trials,
                          seed=cfg.train.seed, threads=args.threads or cfg.eval.threads)
        report.write_json(sub / "eval.json")
        write_manifest(sub, argv, cfg, env, cfg.train.seed)
        o = report.overall()
        rows.append((v, o["success_rate"], o["mean_path_length"], rep.wall_clock))
    rows.sort(key=lambda r: -r[1])
    lines = ["variant,success_rate,mean_path_length,train_seconds"]
    lines += [f"{v},{sr:.4f},{'' if pl is None else f'{pl:.4f}'},{t:.1f}" for v, sr, pl, t in rows]
    (out / "compare.csv").write_text("\n".join(lines) + "\n")
    write_manifest(out, argv, None, env, args.seed)
    print("\n".join(lines))
    print("ordering: " + " > ".join(r[0] for r in rows))
    return 0


def cmd_plot(args, argv) -> int:
    cfg = _run_dir_config(args)
    env = _env(cfg)
    out = _out_dir(args, cfg.train.seed)
    if args.checkpoint:
        fn = _load_fn(args, env)
        metrics = Path(args.checkpoint).parent / "metrics.jsonl"
        if metrics.exists():
            recs = [json.loads(line) for line in metrics.read_text().splitlines() if line.strip()]
            xs = [r["episode"] for r in recs]
            succ = [r["success"] for r in recs]
            if any(s is not None for s in succ):
                window = 50
                flags = np.array([float(s) if s is not None else np.nan for s in succ])
                ys = [np.nanmean(flags[max(0, i - window + 1):i + 1]) for i in range(len(flags))]
                (out / "learning_curve.svg").write_text(svg.curve_svg(xs, ys, label="success rate (50-episode window)"))
            losses = [r["loss"] if r["loss"] is not None else np.nan for r in recs]
            (out / "loss_curve.svg").write_text(svg.curve_svg(xs, losses, label="mean loss"))
    else:
        if not getattr(env, "enumerable", False):
            raise UsageError("plotting without --checkpoint needs an enumerable environment")
        fn = compute_c_star(MdpSpec.from_env(env), cfg.train.h_max)
    s0 = env.initial_state(np.random.default_rng(cfg.train.seed), "test")
    horizons = [int(h) for h in (args.horizons or "1,6,10,24").split(",")]
    horizons = [h for h in horizons if h <= cfg.train.h_max]
    for h in horizons:
        M = heatmap(fn, env, s0, h)
        write_matrix_csv(out / f"heatmap_h{h}.csv", M)
        (out / f"heatmap_h{h}.svg").write_text(svg.heatmap_svg(M))
    goals = env.eval_goals()
    goal = getattr(env, "test_goal", None)
    if goal is None and goals:
        goal = goals[-1][0]
    if hasattr(env, "cells") and goal is not None:
        paths = []
        for h in horizons:
            states, _ = most_likely_trajectory(env, fn, s0, goal, h)
            paths.append(states)
            with open(out / f"trajectory_h{h}.csv", "w") as fh:
                fh.write("t,x,y\n" + "".join(f"{t},{env.cell(s)[0]},{env.cell(s)[1]}\n" for t, s in enumerate(states)))
            arrows = {}
            for s in range(env.n_states):
                if not env.holes[s] and s != goal:
                    vals = fn.action_values(np.asarray([s]), np.asarray([goal]), np.asarray([h]))[0]
                    arrows[s] = int(np.argmax(vals))
            (out / f"policy_h{h}.svg").write_text(svg.arrows_svg(env, arrows, goal=goal))
        (out / "trajectories.svg").write_text(svg.trajectory_svg(env, paths, goal=goal))
    elif goals:
        policy = greedy_behavior(fn, cfg.train, env)
        paths = []
        for i, (g, _tag) in enumerate(goals[:4]):
            _, _, _, trace = rollout(env, policy, g, np.random.default_rng(cfg.train.seed))
            write_trajectory_csv(out / f"trajectory_{i}.csv", env, trace)
            paths.append([s for s, _ in trace])
        (out / "trajectories.svg").write_text(svg.trajectory_svg(env, paths))
    write_manifest(out, argv, cfg, env, cfg.train.seed)
    print(f"plots written to {out}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "oracle": cmd_oracle, "compare": cmd_compare,
            "plot": cmd_plot}


def build_parser() -> Parser:
    p = Parser(prog="cae", description="Cumulative accessibility estimation experiments")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--env", help="environment name (see README)")
        c.add_argument("--config", help="key=value config file")
        c.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        c.add_argument("--seed", type=int)
        c.add_argument("--out", help="output directory (default runs/<timestamp>-<seed>)")
        c.add_argument("--threads", type=int)
        c.add_argument("--h-max", type=int, dest="h_max")
        c.add_argument("--alpha", type=float)
        c.add_argument("--checkpoint")
        if name in ("train", "oracle"):
            c.add_argument("--variant", type=str.lower, choices=["c", "a", "d", "q"])
        if name == "train":
            c.add_argument("--replay-in", dest="replay_in", help="train offline from an episodes JSONL dump")
        if name == "oracle":
            c.add_argument("--gamma", type=float, default=0.99, help="discount for the Q table")
            c.add_argument("--discretize", action="store_true", help="allow the lattice car approximation")
            c.add_argument("--resolution", type=float, default=0.5)
        if name == "compare":
            c.add_argument("--variants", default="c,a,d")
        if name == "plot":
            c.add_argument("--horizons", help="comma-separated horizons for heatmaps and trajectories")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.threads is not None and args.threads < 1:
        print("cae: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args, argv)
    except (ConfigError, UsageError, KeyError, NotEnumerableError) as exc:
        print(f"cae: error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, OSError, ValueError, RuntimeError) as exc:
        print(f"cae: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
