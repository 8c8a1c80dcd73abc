"""Speed versus reliability on the frozen lake.

For each horizon the horizon-aware greedy policy of the exact C* is scored
twice: exactly (forward DP success probability) and by Monte Carlo rollouts
that also give the mean path length of successful episodes. Pass
``--checkpoint`` to score a learned C instead of the oracle.

    python3 scripts/tradeoff_frozen_lake.py --out runs/tradeoff
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from cae import svg
from cae.approx import AccessFn
from cae.envs import make_env
from cae.oracle import MdpSpec, PolicySpec, compute_c_star, policy_success_prob
from cae.policy import as_policy_spec, greedy_action, most_likely_trajectory


def rollout_stats(env, fn, h, trials, rng):
    wins, lengths = 0, []
    for _ in range(trials):
        s, t = env.start, 0
        while t < h and s != env.test_goal and not env.is_terminal(s):
            s, _ = env.step(s, greedy_action(fn, s, env.test_goal, h - t), rng)
            t += 1
        if s == env.test_goal:
            wins += 1
            lengths.append(t)
    return wins / trials, (float(np.mean(lengths)) if lengths else None)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--horizons", default="6,8,10,12,16,20,24,30")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/tradeoff")
    args = p.parse_args()

    env = make_env("frozen-lake")
    mdp = MdpSpec.from_env(env)
    horizons = [int(h) for h in args.horizons.split(",")]
    oracle = compute_c_star(mdp, max(horizons))
    fn = AccessFn.load(env, args.checkpoint) if args.checkpoint else oracle
    pi = PolicySpec.greedy(oracle) if fn is oracle else as_policy_spec(fn, mdp)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows, paths = [], []
    for h in horizons:
        exact = policy_success_prob(mdp, pi, env.start, env.test_goal, h)
        rate, length = rollout_stats(env, fn, h, args.trials, rng)
        states, _ = most_likely_trajectory(env, fn, env.start, env.test_goal, h)
        paths.append(states)
        rows.append((h, exact, rate, length, len(states) - 1))
        print(f"h={h:3d}  exact={exact:.6f}  rollouts={rate:.4f}  "
              f"mean length={'-' if length is None else f'{length:.2f}'}  likely path={len(states) - 1}")

    with open(out / "tradeoff.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "exact_success", "rollout_success", "mean_success_length", "likely_path_length"])
        w.writerows(rows)
    (out / "success_vs_h.svg").write_text(svg.curve_svg(horizons, [r[1] for r in rows], label="P(success) vs h"))
    (out / "trajectories.svg").write_text(svg.trajectory_svg(env, [paths[0], paths[-1]], goal=env.test_goal))
    print(f"written to {out}")


if __name__ == "__main__":
    main()
