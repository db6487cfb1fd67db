#!/usr/bin/env python3
"""Sensor-fault sweep: evaluate defenders over the 15-point FPR/FNR grid.

Desk scale by default (100 episodes, 2 seeds, 50 learner iterations);
--full-scale switches to 500/3/500. Including `learned` in --defenders
trains one policy per grid cell and seed, which at full scale is a long
run.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from attacksim import experiments
from attacksim.graph import bundled_graph, load_graph_file
from attacksim.ppo import HyperParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--graph", default="four_ways", help="bundled name or path")
    parser.add_argument("--defenders", default="random,tripwire")
    parser.add_argument("--out-dir", default="results/sweep")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--full-scale", action="store_true")
    parser.add_argument("--timing", action="store_true")
    args = parser.parse_args()

    graph_path = pathlib.Path(args.graph)
    graph = load_graph_file(graph_path) if graph_path.exists() else bundled_graph(args.graph)
    episodes, seeds, iterations = (
        (500, (1, 2, 3), 500) if args.full_scale
        else (experiments.DESK_EPISODES, experiments.DESK_SEEDS, experiments.DESK_ITERATIONS)
    )
    rows = experiments.run_sweep(
        graph,
        [d.strip() for d in args.defenders.split(",")],
        values=experiments.FULL_NOISE_VALUES,
        episodes=episodes,
        seeds=seeds,
        hp=HyperParams(iterations=iterations),
        jobs=args.jobs,
        timing=args.timing,
    )
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_metrics_csv(rows, out_dir / "sweep.csv")
    experiments.write_summary_csv(rows, out_dir / "sweep_summary.csv")
    print(f"{len(rows)} rows -> {out_dir}/sweep.csv")
    for entry in experiments.aggregate_rows(rows):
        print(
            f"  {entry['defender']:9s} {entry['cell_id']:22s} "
            f"reward {entry['mean_reward_mean']:8.2f} +- {entry['mean_reward_std']:.2f} "
            f"flags {entry['flags_fraction_mean']:.2f}"
        )


if __name__ == "__main__":
    main()
