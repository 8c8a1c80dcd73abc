"""Learned C against the exact C* on the frozen lake.

Trains with the frozen-lake preset (``--backend`` switches table or MLP) and
reports, per seed, the max and mean absolute error over safe states,
1 <= h <= 10 and goals within L1 distance h, plus the horizon-aware greedy
success probability at h = 10 next to the oracle's.

    python3 scripts/tabular_vs_oracle.py --seeds 0 1 2 --backend tabular
"""

import argparse
from dataclasses import replace

import numpy as np

from cae.config import PRESETS
from cae.envs import make_env
from cae.learner import TrainConfig, train
from cae.oracle import MdpSpec, PolicySpec, compute_c_star, policy_success_prob
from cae.policy import as_policy_spec

H = 10


def comparison_set(env):
    safe = np.flatnonzero(~env.holes)
    S, G, Hs = [], [], []
    for h in range(1, H + 1):
        for s in safe:
            for g in range(env.n_goals):
                if env.metric([s], [g])[0] <= h:
                    S.append(s), G.append(g), Hs.append(h)
    return np.array(S), np.array(G), np.array(Hs)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--backend", choices=["tabular", "mlp"], default="tabular")
    p.add_argument("--episodes", type=int)
    args = p.parse_args()

    env = make_env("frozen-lake")
    mdp = MdpSpec.from_env(env)
    oracle = compute_c_star(mdp, H)
    S, G, Hs = comparison_set(env)
    exact = oracle.values[S, :, G, Hs]
    best = policy_success_prob(mdp, PolicySpec.greedy(oracle), env.start, env.test_goal, H)
    for seed in args.seeds:
        cfg = TrainConfig(**dict(PRESETS["frozen-lake"], backend=args.backend, seed=seed))
        if args.episodes is not None:
            cfg = replace(cfg, n_episodes=args.episodes)
        fn, rep = train(env, cfg)
        err = np.abs(fn.predict(S, G, Hs) - exact)
        p = policy_success_prob(mdp, as_policy_spec(fn, mdp), env.start, env.test_goal, H)
        print(f"seed {seed}: max |C - C*| {err.max():.4f}  mean {err.mean():.4f}  "
              f"success@{H} {p:.4f} (oracle {best:.4f})  {rep.wall_clock:.0f}s")


if __name__ == "__main__":
    main()
