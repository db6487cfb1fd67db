"""Command-line entry point.

Subcommands: generate, simulate, train, evaluate, sweep, attacker-matrix,
scaling. Every run is fully seeded, so identical invocations produce
byte-identical output files (pass --timing to record wall-clock training
times at the expense of that guarantee). Exit codes: 0 success, 1 usage
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import experiments, ppo
from .attackers import canonical_kind
from .defenders import DEFENDER_KINDS, make_defender
from .engine import NoiseConfig, run_episode, write_trajectory
from .generate import GenConfig, generate
from .graph import (
    bundled_graph,
    bundled_graph_names,
    default_rewards,
    load_graph_file,
    save_graph_file,
    validate,
)
from .attackers import make_attacker

ATTACKER_CHOICES = ("random", "bfs", "dfs", "pathfinder", "mixture")


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; argparse's default of 2 is reserved for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _resolve_graph(ref: str):
    path = pathlib.Path(ref)
    if path.exists():
        graph = load_graph_file(path)
    elif ref in bundled_graph_names():
        graph = bundled_graph(ref)
    else:
        raise ValueError(
            f"graph {ref!r} is neither a file nor a bundled graph "
            f"(bundled: {', '.join(bundled_graph_names())})"
        )
    violations = validate(graph)
    if violations:
        raise ValueError(f"invalid graph {ref!r}: {violations}")
    return graph


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError as exc:
        raise ValueError(f"bad --seeds value {text!r}: {exc}") from exc
    if not seeds:
        raise ValueError("--seeds must list at least one seed")
    return seeds


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip() != "")


def _rewards_for(graph, args):
    if args.flag_cost is not None:
        from .graph import RewardConfig

        return RewardConfig(defense_cost=args.defense_cost, flag_cost=args.flag_cost)
    return default_rewards(graph, defense_cost=args.defense_cost)


def _add_reward_flags(parser):
    parser.add_argument(
        "--defense-cost",
        type=float,
        default=1.0,
        help="per-step cost of each enabled defense (default: %(default)s)",
    )
    parser.add_argument(
        "--flag-cost",
        type=float,
        default=None,
        help="one-time cost per captured flag (default: 1.5 x total mean TTC of the graph)",
    )


def _add_noise_flags(parser, default=0.0):
    parser.add_argument("--fpr", type=float, default=default, help="IDS false positive rate (default: %(default)s)")
    parser.add_argument("--fnr", type=float, default=default, help="IDS false negative rate (default: %(default)s)")


def _add_hyperparam_flags(parser):
    hp = ppo.HyperParams()
    parser.add_argument("--k-vf", type=float, default=hp.k_vf, help="value-loss coefficient (default: %(default)s)")
    parser.add_argument("--k-s", type=float, default=hp.k_s, help="entropy coefficient (default: %(default)s)")
    parser.add_argument("--k-kl", type=float, default=hp.k_kl, help="KL coefficient (default: %(default)s)")
    parser.add_argument("--train-batch", type=int, default=hp.train_batch, help="environment steps per iteration (default: %(default)s)")
    parser.add_argument("--minibatch", type=int, default=hp.minibatch, help="SGD minibatch size (default: %(default)s)")
    parser.add_argument("--vf-clip", type=float, default=hp.vf_clip, help="value-loss clip bound (default: %(default)s)")
    parser.add_argument("--clip-eps", type=float, default=hp.clip_eps, help="policy ratio clip (default: %(default)s)")
    parser.add_argument("--lr", type=float, default=hp.lr, help="SGD learning rate (default: %(default)s)")
    parser.add_argument("--gamma", type=float, default=hp.gamma, help="discount factor (default: %(default)s)")
    parser.add_argument("--gae-lambda", type=float, default=hp.gae_lambda, help="advantage smoothing (default: %(default)s)")


def _hp_from_args(args, iterations) -> ppo.HyperParams:
    return ppo.HyperParams(
        k_vf=args.k_vf,
        k_s=args.k_s,
        k_kl=args.k_kl,
        train_batch=args.train_batch,
        minibatch=args.minibatch,
        vf_clip=args.vf_clip,
        clip_eps=args.clip_eps,
        lr=args.lr,
        gamma=args.gamma,
        gae_lambda=args.gae_lambda,
        iterations=iterations,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attacksim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="generate a random attack graph")
    p.add_argument("--size", type=int, required=True, help="number of attack steps (multiple of 20)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output graph JSON path")
    p.add_argument("--ttc-min", type=float, default=1.0)
    p.add_argument("--ttc-max", type=float, default=10.0)
    p.add_argument("--and-fraction", type=float, default=0.25)
    p.add_argument("--extra-parent-prob", type=float, default=0.3)
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")

    p = sub.add_parser("simulate", help="run episodes with chosen agents")
    p.add_argument("--graph", required=True, help="graph file or bundled name")
    p.add_argument("--attacker", choices=ATTACKER_CHOICES, default="random")
    p.add_argument("--defender", choices=DEFENDER_KINDS, default="none")
    p.add_argument("--policy-file", help="policy parameters for --defender learned")
    p.add_argument("--mode", choices=("sample", "greedy"), default="sample", help="learned-defender action mode")
    _add_noise_flags(p)
    _add_reward_flags(p)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="write the per-episode summary CSV here")
    p.add_argument("--record", help="write per-step trajectories (one CSV per episode, suffixed by index)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("train", help="train a defender policy")
    p.add_argument("--graph", required=True)
    p.add_argument("--attacker", choices=ATTACKER_CHOICES, default="dfs")
    _add_noise_flags(p)
    _add_reward_flags(p)
    p.add_argument("--iterations", type=int, default=ppo.HyperParams().iterations)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="policy file path")
    p.add_argument("--curve", help="learning-curve CSV path")
    _add_hyperparam_flags(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("evaluate", help="evaluate a defender across seeds")
    p.add_argument("--graph", required=True)
    p.add_argument("--attacker", choices=ATTACKER_CHOICES, default="dfs")
    p.add_argument("--defender", choices=DEFENDER_KINDS, default="random")
    p.add_argument("--policy-file")
    p.add_argument("--mode", choices=("sample", "greedy"), default="sample")
    _add_noise_flags(p)
    _add_reward_flags(p)
    p.add_argument("--episodes", type=int, default=experiments.DESK_EPISODES)
    p.add_argument("--seeds", type=_parse_seeds, default=experiments.DESK_SEEDS)
    p.add_argument("--out", help="metrics CSV path")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sweep", help="noise-grid sweep over defenders")
    p.add_argument("--graph", required=True)
    p.add_argument("--defenders", default="random,tripwire", help="comma-separated defender kinds")
    p.add_argument("--values", type=_parse_floats, default=experiments.FULL_NOISE_VALUES, help="ascending noise rates")
    p.add_argument("--attacker", choices=ATTACKER_CHOICES, default="dfs")
    p.add_argument("--episodes", type=int, default=experiments.DESK_EPISODES)
    p.add_argument("--seeds", type=_parse_seeds, default=experiments.DESK_SEEDS)
    p.add_argument("--iterations", type=int, default=experiments.DESK_ITERATIONS)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="record wall-clock training seconds (output no longer byte-stable)")
    p.add_argument("--out-dir", required=True)
    _add_hyperparam_flags(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("attacker-matrix", help="train per attacker, evaluate against all")
    p.add_argument("--graph", required=True)
    _add_noise_flags(p, default=0.1)
    p.add_argument("--episodes", type=int, default=experiments.DESK_EPISODES)
    p.add_argument("--seeds", type=_parse_seeds, default=experiments.DESK_SEEDS)
    p.add_argument("--iterations", type=int, default=experiments.DESK_ITERATIONS)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out-dir", required=True)
    _add_hyperparam_flags(p)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("scaling", help="graph-size scaling study")
    p.add_argument("--sizes", default="20,40,60,80", help="comma-separated graph sizes")
    p.add_argument("--graph-seed", type=int, default=1, help="seed for graph generation")
    _add_noise_flags(p, default=0.1)
    p.add_argument("--attacker", choices=ATTACKER_CHOICES, default="dfs")
    p.add_argument("--episodes", type=int, default=experiments.DESK_EPISODES)
    p.add_argument("--seeds", type=_parse_seeds, default=experiments.DESK_SEEDS)
    p.add_argument("--iterations", type=int, default=experiments.DESK_ITERATIONS)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--out-dir", required=True)
    _add_hyperparam_flags(p)
    p.add_argument("--json", action="store_true")

    return parser


def _cmd_generate(args) -> int:
    config = GenConfig(
        num_attack_steps=args.size,
        seed=args.seed,
        ttc_mean_range=(args.ttc_min, args.ttc_max),
        and_fraction=args.and_fraction,
        extra_parent_prob=args.extra_parent_prob,
    )
    graph = generate(config)
    save_graph_file(graph, args.out)
    summary = {
        "out": args.out,
        "attack_steps": graph.num_attack_steps,
        "defense_steps": graph.num_defense_steps,
        "flags": len(graph.flag_ids),
    }
    _emit(args, summary, f"wrote {args.out}: |A|={summary['attack_steps']} "
          f"|D|={summary['defense_steps']} flags={summary['flags']}")
    return 0


def _load_policy_arg(args):
    if args.defender == "learned":
        if not args.policy_file:
            raise ValueError("--defender learned requires --policy-file")
        return ppo.load_policy(args.policy_file)
    return None


def _cmd_simulate(args) -> int:
    graph = _resolve_graph(args.graph)
    noise = NoiseConfig(fpr=args.fpr, fnr=args.fnr)
    rewards = _rewards_for(graph, args)
    policy = _load_policy_arg(args)
    attacker = make_attacker(args.attacker)
    defender = make_defender(args.defender, params=policy, mode=args.mode)

    records = []
    for ep in range(args.episodes):
        record = run_episode(graph, attacker, defender, noise, rewards, args.seed, episode=ep)
        records.append(record)
        if args.record:
            stem = pathlib.Path(args.record)
            write_trajectory(record, stem.with_name(f"{stem.stem}_ep{ep:04d}{stem.suffix or '.csv'}"))

    lines = [
        f"episode {r.episode}: len={r.length} reward={r.cumulative_reward:.3f} "
        f"flags={r.flags_fraction:.2f} truncated={r.truncated}"
        for r in records
    ]
    if args.out:
        import csv as _csv

        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["episode", "length", "reward", "flags_fraction", "truncated"])
            for r in records:
                writer.writerow([r.episode, r.length, repr(r.cumulative_reward), repr(r.flags_fraction), int(r.truncated)])
    summary = {
        "episodes": len(records),
        "mean_reward": sum(r.cumulative_reward for r in records) / len(records),
        "mean_flags_fraction": sum(r.flags_fraction for r in records) / len(records),
    }
    _emit(args, summary, "\n".join(lines + [
        f"mean reward {summary['mean_reward']:.3f}, mean flags {summary['mean_flags_fraction']:.2f}"
    ]))
    return 0


def _cmd_train(args) -> int:
    graph = _resolve_graph(args.graph)
    noise = NoiseConfig(fpr=args.fpr, fnr=args.fnr)
    rewards = _rewards_for(graph, args)
    hp = _hp_from_args(args, args.iterations)
    attacker = make_attacker(args.attacker)
    params, curve = ppo.train(graph, attacker, noise, rewards, hp, args.seed)
    ppo.save_policy(params, args.out, seed=args.seed, hp=hp)
    if args.curve:
        ppo.write_curve(curve, args.curve)
    final = curve[-1].mean_episode_reward if curve else None
    summary = {"out": args.out, "iterations": len(curve), "final_mean_episode_reward": final}
    _emit(args, summary, f"trained {len(curve)} iterations -> {args.out}"
          + (f" (final mean episode reward {final:.3f})" if final is not None else ""))
    return 0


def _cmd_evaluate(args) -> int:
    graph = _resolve_graph(args.graph)
    config = experiments.EvalConfig(
        graph=graph,
        attacker=canonical_kind(args.attacker),
        defender=args.defender,
        noise=NoiseConfig(fpr=args.fpr, fnr=args.fnr),
        rewards=_rewards_for(graph, args),
        episodes=args.episodes,
        seeds=tuple(args.seeds),
        policy=_load_policy_arg(args),
        mode=args.mode,
    )
    rows = experiments.evaluate(config)
    if args.out:
        experiments.write_metrics_csv(rows, args.out)
    lines = [
        f"seed {r.seed}: mean reward {r.mean_reward:.3f}, flags {r.flags_fraction:.2f}, "
        f"len {r.mean_len:.1f} [{r.min_len}, {r.max_len}]"
        for r in rows
    ]
    summary = {"rows": [r.__dict__ for r in rows]}
    _emit(args, summary, "\n".join(lines))
    return 0


def _experiment_outputs(args, rows, name) -> None:
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_metrics_csv(rows, out_dir / f"{name}.csv")
    experiments.write_summary_csv(rows, out_dir / f"{name}_summary.csv")


def _cmd_sweep(args) -> int:
    graph = _resolve_graph(args.graph)
    defenders = [d.strip() for d in args.defenders.split(",") if d.strip()]
    for d in defenders:
        if d not in DEFENDER_KINDS:
            raise ValueError(f"unknown defender {d!r}; expected one of {DEFENDER_KINDS}")
    rows = experiments.run_sweep(
        graph,
        defenders,
        values=tuple(args.values),
        episodes=args.episodes,
        seeds=tuple(args.seeds),
        hp=_hp_from_args(args, args.iterations),
        attacker=canonical_kind(args.attacker),
        jobs=args.jobs,
        timing=args.timing,
    )
    _experiment_outputs(args, rows, "sweep")
    _emit(args, {"rows": len(rows), "out_dir": args.out_dir},
          f"sweep: {len(rows)} rows -> {args.out_dir}/sweep.csv")
    return 0


def _cmd_attacker_matrix(args) -> int:
    graph = _resolve_graph(args.graph)
    rows = experiments.attacker_matrix(
        graph,
        hp=_hp_from_args(args, args.iterations),
        noise=(args.fpr, args.fnr),
        episodes=args.episodes,
        seeds=tuple(args.seeds),
        jobs=args.jobs,
        timing=args.timing,
    )
    _experiment_outputs(args, rows, "attacker_matrix")
    _emit(args, {"rows": len(rows), "out_dir": args.out_dir},
          f"attacker matrix: {len(rows)} rows -> {args.out_dir}/attacker_matrix.csv")
    return 0


def _cmd_scaling(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(",") if s.strip())
    rows = experiments.scaling_study(
        sizes=sizes,
        hp=_hp_from_args(args, args.iterations),
        noise=(args.fpr, args.fnr),
        episodes=args.episodes,
        seeds=tuple(args.seeds),
        attacker=canonical_kind(args.attacker),
        graph_seed=args.graph_seed,
        jobs=args.jobs,
        timing=args.timing,
    )
    _experiment_outputs(args, rows, "scaling")
    _emit(args, {"rows": len(rows), "out_dir": args.out_dir},
          f"scaling: {len(rows)} rows -> {args.out_dir}/scaling.csv")
    return 0


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "attacker-matrix": _cmd_attacker_matrix,
    "scaling": _cmd_scaling,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        print(f"attacksim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
