"""Reachability heatmaps for the wall-free 5 degree car from the lattice oracle.

Small horizons give two lobes along the heading (forward and reverse) with
nothing to the sides. Pass ``--checkpoint`` to also draw a learned C over
the same goal grid.

    python3 scripts/car_heatmaps.py --horizons 2 4 6 --out runs/car_heatmaps
"""

import argparse
from pathlib import Path

import numpy as np

from cae import svg
from cae.approx import AccessFn
from cae.envs import DiscretizedDubins, make_env
from cae.evaluation import heatmap, write_matrix_csv
from cae.oracle import MdpSpec, reachability_from


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--env", default="dubins-open5")
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--horizons", type=int, nargs="+", default=[2, 4, 6])
    p.add_argument("--checkpoint")
    p.add_argument("--out", default="runs/car_heatmaps")
    args = p.parse_args()

    car = make_env(args.env)
    lattice = DiscretizedDubins(car, args.resolution)
    mdp = MdpSpec.from_env(lattice)
    s0 = lattice.index_of(car.start)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    R = reachability_from(mdp, s0, args.horizons, chunk=128)
    n = lattice.n_side
    pos = np.array([lattice.goal_position(g) for g in range(lattice.n_goals)])
    ix = np.rint(pos / args.resolution).astype(int)
    fn = AccessFn.load(car, args.checkpoint) if args.checkpoint else None
    for h, row in zip(sorted(args.horizons), R):
        M = np.zeros((n, n))
        M[ix[:, 1], ix[:, 0]] = row
        write_matrix_csv(out / f"oracle_h{h}.csv", M)
        (out / f"oracle_h{h}.svg").write_text(svg.heatmap_svg(M, cell=12))
        print(f"h={h}: {int(row.sum())} of {lattice.n_goals} lattice goals reachable")
        if fn is not None:
            L = heatmap(fn, car, car.start, h, resolution=args.resolution)
            write_matrix_csv(out / f"learned_h{h}.csv", L)
            (out / f"learned_h{h}.svg").write_text(svg.heatmap_svg(L, cell=12))
    print(f"written to {out}")


if __name__ == "__main__":
    main()
