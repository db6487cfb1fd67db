import numpy as np
import pytest

from attacksim.graph import AttackGraph, AttackStep, DefenseStep, default_rewards
from attacksim.engine import NoiseConfig
from attacksim import experiments
from attacksim.experiments import (
    EvalConfig,
    MetricsRow,
    aggregate_rows,
    attacker_matrix,
    evaluate,
    noise_grid,
    reward_ttest,
    run_episodes,
    run_sweep,
    scaling_study,
    write_metrics_csv,
    write_summary_csv,
)
from attacksim.ppo import HyperParams

TINY_HP = HyperParams(train_batch=32, minibatch=16, iterations=1)


class TestNoiseGrid:
    def test_default_values_give_fifteen_cells(self):
        cells = noise_grid([0.0, 0.125, 0.25, 0.725, 1.0])
        assert len(cells) == 15
        assert all(fnr <= fpr for fpr, fnr in cells)

    def test_single_value(self):
        assert noise_grid([0.0]) == [(0.0, 0.0)]

    def test_two_values_enumerated(self):
        assert noise_grid([0.0, 0.5]) == [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5)]

    def test_rejects_unsorted_or_out_of_range(self):
        with pytest.raises(ValueError):
            noise_grid([0.5, 0.0])
        with pytest.raises(ValueError):
            noise_grid([0.0, 1.5])


class TestEvaluate:
    def config(self, graph, **overrides):
        defaults = dict(
            graph=graph,
            attacker="random",
            defender="random",
            noise=NoiseConfig(0.1, 0.1),
            rewards=default_rewards(graph),
            episodes=20,
            seeds=(1, 2),
        )
        defaults.update(overrides)
        return EvalConfig(**defaults)

    def test_rewards_finite_and_non_positive(self, two_keys_graph):
        rows = evaluate(self.config(two_keys_graph))
        assert len(rows) == 2
        for row in rows:
            assert np.isfinite(row.mean_reward)
            assert row.mean_reward <= 0.0
            assert 0.0 <= row.flags_fraction <= 1.0
            assert row.min_len <= row.mean_len <= row.max_len

    def test_deterministic(self, two_keys_graph):
        assert evaluate(self.config(two_keys_graph)) == evaluate(self.config(two_keys_graph))

    def test_fnr_one_tripwire_equals_no_defender(self, four_ways_graph):
        # with every alert suppressed the tripwire never acts, so its
        # episodes replay the no-defender baseline exactly
        rewards = default_rewards(four_ways_graph)
        noise = NoiseConfig(fpr=0.0, fnr=1.0)
        for ep in range(20):
            a = run_episodes(four_ways_graph, "dfs", "tripwire", noise, rewards, 3, 1)[0]
            b = run_episodes(four_ways_graph, "dfs", "none", noise, rewards, 3, 1)[0]
            assert a.flags_fraction == b.flags_fraction
            assert a.cumulative_reward == b.cumulative_reward
            assert [r.attacker_action for r in a.steps] == [
                r.attacker_action for r in b.steps
            ]

    def test_config_validation(self, toy_graph):
        with pytest.raises(ValueError):
            self.config(toy_graph, episodes=0)
        with pytest.raises(ValueError):
            self.config(toy_graph, seeds=())


class TestPairedEvaluation:
    def test_defenseless_graph_shares_attacker_sequences(self):
        # when the graph has no defenses every defender is a no-op stream,
        # so paired evaluations replay identical attacker actions
        steps = (
            AttackStep(id="entry", is_entry=True),
            AttackStep(id="a", ttc_mean=2.0),
            AttackStep(id="b", ttc_mean=2.0, is_flag=True),
        )
        g = AttackGraph(
            attack_steps=steps,
            edges=frozenset({("entry", "a"), ("a", "b"), ("entry", "b")}),
        )
        rewards = default_rewards(g)
        noise = NoiseConfig(0.1, 0.1)
        a = run_episodes(g, "random", "none", noise, rewards, 7, 10)
        b = run_episodes(g, "random", "random", noise, rewards, 7, 10)
        for ra, rb in zip(a, b):
            assert [r.attacker_action for r in ra.steps] == [
                r.attacker_action for r in rb.steps
            ]


class TestRandomDefenderFlatness:
    def test_metrics_identical_across_noise_cells(self, two_keys_graph):
        # the random defender ignores observations and noise draws live on
        # the environment stream, so matching seeds give matching episodes
        rewards = default_rewards(two_keys_graph)
        baseline = None
        for fpr, fnr in noise_grid([0.0, 0.5, 1.0]):
            records = run_episodes(
                two_keys_graph, "random", "random", NoiseConfig(fpr, fnr), rewards, 5, 30
            )
            rewards_seq = [r.cumulative_reward for r in records]
            if baseline is None:
                baseline = rewards_seq
            else:
                assert rewards_seq == baseline


class TestSweep:
    def test_tripwire_beats_random_on_clean_observations(self):
        # flags guarded at the end of a long unguarded approach: blanket
        # random blocking pays upkeep for the whole slog while the tripwire
        # waits for alerts (paired seeds)
        steps = [
            AttackStep(id="entry", is_entry=True),
            AttackStep(id="t1", ttc_mean=4.0),
            AttackStep(id="t2", ttc_mean=4.0),
            AttackStep(id="t3", ttc_mean=4.0),
            AttackStep(id="hub", ttc_mean=1.0),
        ]
        edges = {("entry", "t1"), ("t1", "t2"), ("t2", "t3"), ("t3", "hub")}
        defenses = []
        for i in range(4):
            breach, flag, block = f"breach{i}", f"flag{i}", f"block{i}"
            steps.append(AttackStep(id=breach, ttc_mean=1.0))
            steps.append(AttackStep(id=flag, ttc_mean=1.0, is_flag=True))
            defenses.append(DefenseStep(id=block))
            edges.update({("hub", breach), (breach, flag), (block, breach), (block, flag)})
        g = AttackGraph(
            attack_steps=tuple(steps),
            defense_steps=tuple(defenses),
            edges=frozenset(edges),
        )
        rewards = default_rewards(g)
        noise = NoiseConfig(0.0, 0.0)
        tripwire = [
            r.cumulative_reward
            for r in run_episodes(g, "dfs", "tripwire", noise, rewards, 1, 100)
        ]
        random_def = [
            r.cumulative_reward
            for r in run_episodes(g, "dfs", "random", noise, rewards, 1, 100)
        ]
        assert np.mean(tripwire) >= np.mean(random_def)
        assert reward_ttest(tripwire, random_def) < 0.05

    def test_heuristic_sweep_shape(self, two_keys_graph):
        rows = run_sweep(
            two_keys_graph,
            ["random", "tripwire"],
            values=(0.0, 0.5, 1.0),
            episodes=5,
            seeds=(1, 2),
        )
        # 6 cells x 2 defenders x 2 seeds
        assert len(rows) == 24
        assert {r.defender for r in rows} == {"random", "tripwire"}
        cells = {(r.fpr, r.fnr) for r in rows}
        assert len(cells) == 6
        for row in rows:
            assert row.train_seconds == 0.0
            assert row.train_attacker == ""

    def test_learned_sweep_trains_per_cell(self, toy_graph):
        rows = run_sweep(
            toy_graph,
            ["learned"],
            values=(0.0,),
            episodes=3,
            seeds=(1,),
            hp=TINY_HP,
        )
        assert len(rows) == 1
        assert rows[0].defender == "learned"
        assert rows[0].train_attacker == "depth_first"

    def test_jobs_parallel_matches_serial(self, toy_graph):
        kwargs = dict(values=(0.0, 1.0), episodes=4, seeds=(1, 2), hp=TINY_HP)
        serial = run_sweep(toy_graph, ["random", "tripwire"], jobs=1, **kwargs)
        parallel = run_sweep(toy_graph, ["random", "tripwire"], jobs=3, **kwargs)
        assert serial == parallel


class TestAttackerMatrix:
    def test_shape_and_diagonal(self, toy_graph):
        rows = attacker_matrix(toy_graph, hp=TINY_HP, episodes=3, seeds=(1,))
        # 5 training attackers x 5 eval attackers x 1 seed
        assert len(rows) == 25
        trains = {r.train_attacker for r in rows}
        assert trains == {"random", "breadth_first", "depth_first", "pathfinder", "mixture"}
        diagonal = [r for r in rows if r.train_attacker == r.eval_attacker]
        assert len(diagonal) == 5
        assert all(r.defender == "learned" for r in rows)


class TestScaling:
    def test_shape_and_flag_counts(self):
        rows = scaling_study(sizes=(20, 40), hp=TINY_HP, episodes=3, seeds=(1,))
        # 2 sizes x 2 defenders x 1 seed
        assert len(rows) == 4
        assert {r.defender for r in rows} == {"learned", "tripwire"}
        assert {r.graph_size for r in rows} == {20, 40}


class TestAggregationAndOutput:
    def rows(self):
        return [
            MetricsRow("e", "c", 0.0, 0.0, 2, "", "random", "random", 1, -10.0, 0.5, 3.0, 2, 4),
            MetricsRow("e", "c", 0.0, 0.0, 2, "", "random", "random", 2, -20.0, 0.7, 5.0, 3, 7),
        ]

    def test_cross_seed_mean_is_arithmetic_mean(self):
        summary = aggregate_rows(self.rows())
        assert len(summary) == 1
        assert summary[0]["mean_reward_mean"] == pytest.approx(-15.0)
        assert summary[0]["seeds"] == 2
        assert summary[0]["mean_reward_std"] == pytest.approx(np.std([-10, -20], ddof=1))

    def test_csv_round_trip(self, tmp_path):
        import csv

        path = tmp_path / "metrics.csv"
        write_metrics_csv(self.rows(), path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert rows[0]["mean_reward"] == "-10.0"
        assert list(rows[0]) == list(experiments.METRICS_COLUMNS)

    def test_summary_csv(self, tmp_path):
        path = tmp_path / "summary.csv"
        write_summary_csv(self.rows(), path)
        text = path.read_text()
        assert "mean_reward_mean" in text
        assert "-15.0" in text


class TestRewardTtest:
    def test_distinguishes_clear_gap(self):
        rng = np.random.default_rng(0)
        a = rng.normal(-1.0, 0.1, size=200)
        b = rng.normal(-5.0, 0.1, size=200)
        assert reward_ttest(a, b) < 0.001

    def test_identical_constant_samples(self):
        assert reward_ttest([-1.0] * 50, [-1.0] * 50) == 1.0
        assert reward_ttest([-1.0] * 50, [-2.0] * 50) == 0.0

    def test_one_sided_variance(self):
        a = [-1.0] * 100
        rng = np.random.default_rng(1)
        b = rng.normal(-3.0, 0.5, size=100)
        assert reward_ttest(a, b) < 0.001
