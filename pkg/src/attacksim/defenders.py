"""Defender policies: no-op, random, tripwire and the learned-policy wrapper.

A defender selects one currently disabled defense step per time-step, or
no-op (None). The mask handed to select() is the tuple of disabled defenses
in graph index order; returning anything else is an engine contract
violation.
"""

from __future__ import annotations

import numpy as np

from .graph import AttackGraph
from .engine import Observation
from . import ppo

DEFENDER_KINDS = ("none", "random", "tripwire", "learned")


def make_defender(kind: str, params: "ppo.PolicyParams | None" = None, mode: str = "sample"):
    if kind == "none":
        return NoopDefender()
    if kind == "random":
        return RandomDefender()
    if kind == "tripwire":
        return TripwireDefender()
    if kind == "learned":
        if params is None:
            raise ValueError("learned defender requires policy parameters")
        return LearnedDefender(params, mode=mode)
    raise ValueError(f"unknown defender kind {kind!r}; expected one of {DEFENDER_KINDS}")


class DefenderPolicy:
    kind = "base"

    def reset(self, graph: AttackGraph, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def select(self, observation: Observation, mask: tuple[str, ...]) -> str | None:
        raise NotImplementedError


class NoopDefender(DefenderPolicy):
    kind = "none"

    def reset(self, graph, rng):
        pass

    def select(self, observation, mask):
        return None


class RandomDefender(DefenderPolicy):
    """Uniform over the disabled defenses plus no-op; never reads the
    observation."""

    kind = "random"

    def reset(self, graph, rng):
        self._rng = rng

    def select(self, observation, mask):
        options = list(mask) + [None]
        return options[int(self._rng.integers(len(options)))]


class TripwireDefender(DefenderPolicy):
    """If-this-then-that rule: enable the first (by defense index) disabled
    defense with a child attack step reported compromised. One defense per
    time-step; further triggered defenses fire on later steps."""

    kind = "tripwire"

    def reset(self, graph, rng):
        self._child_indices = {
            d: np.array([graph.attack_index[c] for c in graph.children(d)], dtype=int)
            for d in graph.defense_ids
        }

    def select(self, observation, mask):
        for defense in mask:
            idx = self._child_indices[defense]
            if idx.size and observation.attack_bits[idx].any():
                return defense
        return None


def learned_select(
    observation: Observation,
    params: "ppo.PolicyParams",
    mask: tuple[str, ...],
    rng: np.random.Generator,
    mode: str,
    defense_ids: tuple[str, ...],
) -> str | None:
    """Pick a defense through the policy network. Already-enabled defenses
    get zero probability via the action mask; `sample` draws from the masked
    categorical, `greedy` takes the argmax."""
    x = observation.vector()
    logits, _ = ppo.forward(params, x)
    legal = ppo.legal_action_mask(defense_ids, mask)
    probs, _ = ppo.masked_log_softmax(logits, legal)
    if mode == "greedy":
        action = int(np.argmax(np.where(legal, probs, -1.0)))
    elif mode == "sample":
        action = ppo.sample_action(probs, legal, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'sample' or 'greedy'")
    if action == len(defense_ids):
        return None
    return defense_ids[action]


class LearnedDefender(DefenderPolicy):
    kind = "learned"

    def __init__(self, params: "ppo.PolicyParams", mode: str = "sample"):
        if mode not in ("sample", "greedy"):
            raise ValueError(f"unknown mode {mode!r}; expected 'sample' or 'greedy'")
        self.params = params
        self.mode = mode

    def reset(self, graph, rng):
        if (
            params_dims := (self.params.num_attack_steps, self.params.num_defense_steps)
        ) != (graph.num_attack_steps, graph.num_defense_steps):
            raise ValueError(
                f"policy built for |A|,|D|={params_dims} cannot drive a graph "
                f"with |A|,|D|={(graph.num_attack_steps, graph.num_defense_steps)}"
            )
        self._graph = graph
        self._rng = rng

    def select(self, observation, mask):
        return learned_select(
            observation, self.params, mask, self._rng, self.mode, self._graph.defense_ids
        )
