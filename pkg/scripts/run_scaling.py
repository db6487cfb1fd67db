#!/usr/bin/env python3
"""Graph-size scaling study: generate graphs of 20..80 attack steps, train
the learned defender on each and evaluate it next to the tripwire policy at
10% FPR/FNR. Pass --timing to record wall-clock training seconds.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from attacksim import experiments
from attacksim.ppo import HyperParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="20,40,60,80")
    parser.add_argument("--graph-seed", type=int, default=1)
    parser.add_argument("--out-dir", default="results/scaling")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--full-scale", action="store_true")
    parser.add_argument("--timing", action="store_true")
    args = parser.parse_args()

    episodes, seeds, iterations = (
        (500, (1, 2, 3), 500) if args.full_scale
        else (experiments.DESK_EPISODES, experiments.DESK_SEEDS, experiments.DESK_ITERATIONS)
    )
    rows = experiments.scaling_study(
        sizes=tuple(int(s) for s in args.sizes.split(",")),
        hp=HyperParams(iterations=iterations),
        noise=(0.1, 0.1),
        episodes=episodes,
        seeds=seeds,
        graph_seed=args.graph_seed,
        jobs=args.jobs,
        timing=args.timing,
    )
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_metrics_csv(rows, out_dir / "scaling.csv")
    experiments.write_summary_csv(rows, out_dir / "scaling_summary.csv")
    print(f"{len(rows)} rows -> {out_dir}/scaling.csv")
    for entry in experiments.aggregate_rows(rows):
        print(
            f"  {entry['cell_id']:28s} reward {entry['mean_reward_mean']:9.2f} "
            f"+- {entry['mean_reward_std']:.2f} flags {entry['flags_fraction_mean']:.2f}"
        )


if __name__ == "__main__":
    main()
