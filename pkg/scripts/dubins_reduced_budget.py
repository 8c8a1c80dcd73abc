"""Neural C-learning on the Dubins car at a reduced budget, several seeds.

The reduced budget is 2000 episodes with hidden sizes 200/100; ``--full``
keeps the preset's full budget (4500 episodes, 400/300). The car is
deterministic so each goal is evaluated once per seed.

    python3 scripts/dubins_reduced_budget.py --seeds 0 1 2 --out runs/dubins
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from cae.config import preset
from cae.envs import make_env
from cae.evaluation import aggregate_seeds, evaluate
from cae.learner import greedy_behavior, train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--episodes", type=int)
    p.add_argument("--full", action="store_true", help="use the preset's full budget")
    p.add_argument("--env", default="dubins")
    p.add_argument("--out", default="runs/dubins")
    args = p.parse_args()

    env = make_env(args.env)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for seed in args.seeds:
        cfg = preset(args.env, "C", seed).train
        if not args.full:
            cfg = replace(cfg, hidden=(200, 100), n_episodes=2000)
        if args.episodes is not None:
            cfg.n_episodes = args.episodes
        fn, rep = train(env, cfg, metrics_path=out / f"metrics_{seed}.jsonl",
                        checkpoint_path=out / f"checkpoint_{seed}.json", log=print)
        report = evaluate(env, greedy_behavior(fn, cfg, env), trials=1, seed=seed)
        report.write_json(out / f"eval_{seed}.json")
        reports.append(report)
        print(f"seed {seed}: success {report.success_rate:.2f}%  "
              f"mean final distance {report.overall()['mean_final_distance']:.3f}  "
              f"train time {rep.wall_clock:.0f}s")
    agg = aggregate_seeds(reports)
    (out / "summary.json").write_text(json.dumps(agg, indent=2) + "\n")
    o = agg["overall"]
    print(f"overall: {o['mean']:.2f}% +/- {o['std']:.2f} over {o['seeds']} seeds")


if __name__ == "__main__":
    main()
