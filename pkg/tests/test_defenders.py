from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attacksim.graph import (
    AttackGraph,
    AttackStep,
    DefenseStep,
    attack_surface,
    default_rewards,
)
from attacksim.engine import NoiseConfig, Observation, init_episode, observe, run_episode, step
from attacksim.attackers import make_attacker
from attacksim.defenders import make_defender
from attacksim import ppo

NO_NOISE = NoiseConfig(0.0, 0.0)


def obs_of(graph, attack_bits, defense_bits):
    return Observation(
        attack_bits=np.array(attack_bits, dtype=np.uint8),
        defense_bits=np.array(defense_bits, dtype=np.uint8),
    )


def two_defense_graph():
    steps = (
        AttackStep(id="entry", is_entry=True),
        AttackStep(id="a", ttc_mean=2.0),
        AttackStep(id="b", ttc_mean=2.0),
    )
    return AttackGraph(
        attack_steps=steps,
        defense_steps=(DefenseStep(id="d0"), DefenseStep(id="d1")),
        edges=frozenset({("entry", "a"), ("entry", "b"), ("d0", "a"), ("d1", "b")}),
    )


class TestRandomDefender:
    def test_only_noop_when_all_enabled(self):
        g = two_defense_graph()
        defender = make_defender("random")
        defender.reset(g, np.random.default_rng(0))
        for _ in range(50):
            assert defender.select(None, ()) is None

    def test_fifty_fifty_with_one_disabled(self):
        g = two_defense_graph()
        defender = make_defender("random")
        defender.reset(g, np.random.default_rng(1))
        counts = Counter(defender.select(None, ("d0",)) for _ in range(10_000))
        assert abs(counts["d0"] / 10_000 - 0.5) < 0.02
        assert abs(counts[None] / 10_000 - 0.5) < 0.02

    def test_uniform_over_three_disabled(self):
        steps = (AttackStep(id="entry", is_entry=True), AttackStep(id="a", ttc_mean=1.0))
        g = AttackGraph(
            attack_steps=steps,
            defense_steps=tuple(DefenseStep(id=f"d{i}") for i in range(3)),
            edges=frozenset({("entry", "a"), ("d0", "a"), ("d1", "a"), ("d2", "a")}),
        )
        defender = make_defender("random")
        defender.reset(g, np.random.default_rng(2))
        mask = ("d0", "d1", "d2")
        counts = Counter(defender.select(None, mask) for _ in range(10_000))
        for option in ["d0", "d1", "d2", None]:
            assert abs(counts[option] / 10_000 - 0.25) < 0.02


class TestTripwire:
    def test_fires_on_observed_child(self):
        g = two_defense_graph()
        defender = make_defender("tripwire")
        defender.reset(g, np.random.default_rng(0))
        # a (index 1) reads compromised; d0 guards a
        obs = obs_of(g, [0, 1, 0], [0, 0])
        assert defender.select(obs, ("d0", "d1")) == "d0"

    def test_noop_when_all_bits_zero(self):
        g = two_defense_graph()
        defender = make_defender("tripwire")
        defender.reset(g, np.random.default_rng(0))
        obs = obs_of(g, [0, 0, 0], [0, 0])
        assert defender.select(obs, ("d0", "d1")) is None

    def test_lowest_index_fires_first(self):
        g = two_defense_graph()
        defender = make_defender("tripwire")
        defender.reset(g, np.random.default_rng(0))
        obs = obs_of(g, [0, 1, 1], [0, 0])  # both children alerting
        assert defender.select(obs, ("d0", "d1")) == "d0"
        # with d0 already enabled, the next triggered defense fires
        assert defender.select(obs, ("d1",)) == "d1"

    def test_never_fires_with_fnr_one(self, four_ways_graph):
        rewards = default_rewards(four_ways_graph)
        record = run_episode(
            four_ways_graph,
            make_attacker("dfs"),
            make_defender("tripwire"),
            NoiseConfig(fpr=0.0, fnr=1.0),
            rewards,
            seed=3,
        )
        assert all(r.defender_action is None for r in record.steps)

    def test_fpr_zero_fires_only_on_true_compromise(self, four_ways_graph):
        # under fpr=0 every 1-bit is a truly compromised step
        g = four_ways_graph
        rewards = default_rewards(g)
        noise = NoiseConfig(fpr=0.0, fnr=0.4)
        for ep in range(10):
            state = init_episode(g, noise, rewards, seed=31, episode=ep)
            attacker = make_attacker("random")
            attacker.reset(g, state, np.random.default_rng(ep))
            defender = make_defender("tripwire")
            defender.reset(g, np.random.default_rng(0))
            obs = observe(state)
            while True:
                surface = attack_surface(g, state.compromised, state.enabled)
                if not surface:
                    break
                mask = tuple(d for d in g.defense_ids if d not in state.enabled)
                action = defender.select(obs, mask)
                if action is not None:
                    children = g.children(action)
                    assert any(c in state.compromised for c in children)
                outcome = step(state, attacker.select(state, surface), action, surface=surface)
                obs = outcome.observation

    def test_fnr_zero_reacts_next_step(self):
        # with perfect recall, a compromised child of a disabled defense
        # triggers some defense enable on the following step
        g = two_defense_graph()
        rewards = default_rewards(g)
        state = init_episode(g, NO_NOISE, rewards, seed=5)
        state.remaining_ttc["a"] = 1.0
        defender = make_defender("tripwire")
        defender.reset(g, np.random.default_rng(0))
        outcome = step(state, "a", None)
        assert "a" in state.compromised
        mask = tuple(d for d in g.defense_ids if d not in state.enabled)
        assert defender.select(outcome.observation, mask) == "d0"


def zero_policy(graph, bp=None):
    params = ppo.init_params(
        graph.num_attack_steps, graph.num_defense_steps, np.random.default_rng(0)
    )
    for arr in params.arrays().values():
        arr[...] = 0.0
    if bp is not None:
        params.bp[...] = np.asarray(bp, dtype=np.float64)
    return params


class TestLearnedDefender:
    def test_uniform_when_logits_zero(self):
        g = two_defense_graph()
        params = zero_policy(g)
        defender = make_defender("learned", params=params, mode="sample")
        defender.reset(g, np.random.default_rng(7))
        obs = obs_of(g, [1, 0, 0], [0, 0])
        counts = Counter(defender.select(obs, ("d0", "d1")) for _ in range(10_000))
        for option in ["d0", "d1", None]:
            assert abs(counts[option] / 10_000 - 1 / 3) < 0.02

    def test_full_mask_forces_noop(self):
        g = two_defense_graph()
        params = zero_policy(g, bp=[50.0, 50.0, -50.0])
        defender = make_defender("learned", params=params, mode="sample")
        defender.reset(g, np.random.default_rng(0))
        obs = obs_of(g, [1, 0, 0], [1, 1])
        for _ in range(200):
            assert defender.select(obs, ()) is None

    def test_greedy_takes_argmax(self):
        g = two_defense_graph()
        params = zero_policy(g, bp=[2.0, 1.0, 0.5])
        defender = make_defender("learned", params=params, mode="greedy")
        defender.reset(g, np.random.default_rng(0))
        obs = obs_of(g, [1, 0, 0], [0, 0])
        assert defender.select(obs, ("d0", "d1")) == "d0"

    def test_shape_mismatch_rejected(self, four_ways_graph):
        g = two_defense_graph()
        params = zero_policy(g)
        defender = make_defender("learned", params=params)
        with pytest.raises(ValueError, match=r"\|A\|,\|D\|"):
            defender.reset(four_ways_graph, np.random.default_rng(0))

    def test_learned_requires_params(self):
        with pytest.raises(ValueError, match="policy parameters"):
            make_defender("learned")


class TestMaskRespected:
    @given(data=st.data())
    @settings(max_examples=80, deadline=None)
    def test_no_policy_returns_enabled_defense(self, data):
        g = two_defense_graph()
        mask = tuple(
            d for d in g.defense_ids if data.draw(st.booleans(), label=f"disabled_{d}")
        )
        seed = data.draw(st.integers(0, 2**32 - 1))
        obs_bits = [data.draw(st.integers(0, 1)) for _ in range(3)]
        obs = obs_of(g, obs_bits, [int(d not in mask) for d in g.defense_ids])
        params = ppo.init_params(3, 2, np.random.default_rng(seed))
        for kind, kwargs in [
            ("none", {}),
            ("random", {}),
            ("tripwire", {}),
            ("learned", {"params": params}),
        ]:
            defender = make_defender(kind, **kwargs)
            defender.reset(g, np.random.default_rng(seed))
            choice = defender.select(obs, mask)
            assert choice is None or choice in mask
