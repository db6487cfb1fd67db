#!/usr/bin/env python3
"""Attacker generalization matrix: train the learned defender against each
attacker kind, then evaluate every policy against every attacker (5x5 cells
per seed) at 10% FPR/FNR.
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
    parser.add_argument("--graph", default="two_keys_one_door", help="bundled name or path")
    parser.add_argument("--out-dir", default="results/attacker_matrix")
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
    rows = experiments.attacker_matrix(
        graph,
        hp=HyperParams(iterations=iterations),
        noise=(0.1, 0.1),
        episodes=episodes,
        seeds=seeds,
        jobs=args.jobs,
        timing=args.timing,
    )
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_metrics_csv(rows, out_dir / "attacker_matrix.csv")
    experiments.write_summary_csv(rows, out_dir / "attacker_matrix_summary.csv")
    print(f"{len(rows)} rows -> {out_dir}/attacker_matrix.csv")
    for entry in experiments.aggregate_rows(rows):
        print(
            f"  {entry['cell_id']:45s} reward {entry['mean_reward_mean']:8.2f} "
            f"+- {entry['mean_reward_std']:.2f}"
        )


if __name__ == "__main__":
    main()
