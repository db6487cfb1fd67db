"""Attacker policies: random, breadth-first, depth-first, pathfinder and a
per-episode mixture of the four.

Every policy returns a member of the current attack surface (or None when it
is empty) and keeps only episode-local state; reset() is called by the
episode runner with a per-episode RNG stream, so attacker behavior is
reproducible independently of IDS noise draws.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .graph import AttackGraph
from .engine import SimState

ATTACKER_KINDS = ("random", "breadth_first", "depth_first", "pathfinder", "mixture")

_ALIASES = {
    "bfs": "breadth_first",
    "dfs": "depth_first",
}


def canonical_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in ATTACKER_KINDS:
        raise ValueError(f"unknown attacker kind {kind!r}; expected one of {ATTACKER_KINDS}")
    return kind


def make_attacker(kind: str) -> "AttackerPolicy":
    kind = canonical_kind(kind)
    return {
        "random": RandomAttacker,
        "breadth_first": BreadthFirstAttacker,
        "depth_first": DepthFirstAttacker,
        "pathfinder": PathfinderAttacker,
        "mixture": MixtureAttacker,
    }[kind]()


class AttackerPolicy:
    kind = "base"

    def reset(self, graph: AttackGraph, state: SimState, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def select(self, state: SimState, surface: set[str]) -> str | None:
        raise NotImplementedError


def _uniform_choice(rng: np.random.Generator, surface: set[str]) -> str:
    options = sorted(surface)
    return options[int(rng.integers(len(options)))]


class RandomAttacker(AttackerPolicy):
    kind = "random"

    def reset(self, graph, state, rng):
        self._rng = rng

    def select(self, state, surface):
        if not surface:
            return None
        return _uniform_choice(self._rng, surface)


class BreadthFirstAttacker(AttackerPolicy):
    """Works every step at the current discovery depth to completion before
    moving deeper; steps discovered together are ordered by a shuffle."""

    kind = "breadth_first"

    def reset(self, graph, state, rng):
        self._rng = rng
        self._queue: deque[str] = deque()
        self._queued: set[str] = set()

    def select(self, state, surface):
        if not surface:
            return None
        fresh = sorted(surface - self._queued)
        self._rng.shuffle(fresh)
        for sid in fresh:
            self._queue.append(sid)
            self._queued.add(sid)
        # entries that left the surface (compromised or blocked) are dropped
        # lazily; a step that resurfaces later counts as a new discovery
        while self._queue and self._queue[0] not in surface:
            self._queued.discard(self._queue.popleft())
        return self._queue[0]


class DepthFirstAttacker(AttackerPolicy):
    """Follows newly exposed children of the last compromise; dead ends
    backtrack to the most recently stacked alternative."""

    kind = "depth_first"

    def reset(self, graph, state, rng):
        self._rng = rng
        self._stack: list[str] = []
        self._stacked: set[str] = set()

    def select(self, state, surface):
        if not surface:
            return None
        fresh = sorted(surface - self._stacked)
        self._rng.shuffle(fresh)
        for sid in fresh:
            self._stack.append(sid)
            self._stacked.add(sid)
        while self._stack and self._stack[-1] not in surface:
            self._stacked.discard(self._stack.pop())
        return self._stack[-1]


def work_steps(remaining: float) -> int:
    """Attacker work-steps needed to compromise a step with the given
    remaining TTC: one decrement per step, compromise at <= 0."""
    return max(1, int(math.ceil(remaining)))


def attainment_costs(
    graph: AttackGraph,
    remaining_ttc: dict[str, float],
    compromised: set[str],
    enabled: set[str],
) -> dict[str, float]:
    """Estimated work-steps to compromise each attack step from the current
    position. OR-steps take their cheapest parent; AND-steps are priced as
    their own work plus the sum of their uncompromised parents' costs (a
    monotone relaxation, since exact AND-aware planning is intractable).
    Blocked or unreachable steps cost inf.
    """
    cost = {
        sid: 0.0 if sid in compromised else math.inf for sid in graph.attack_ids
    }
    blocked = {
        sid
        for sid in graph.attack_ids
        if any(d in enabled for d in graph.defense_parents(sid))
    }
    changed = True
    while changed:
        changed = False
        for step_obj in graph.attack_steps:
            sid = step_obj.id
            if sid in compromised or sid in blocked:
                continue
            parents = graph.attack_parents(sid)
            if not parents:
                continue
            own = float(work_steps(remaining_ttc[sid]))
            if step_obj.logic == "or":
                best = min(cost[p] for p in parents)
                if math.isinf(best):
                    continue
                candidate = own + best
            else:
                if any(math.isinf(cost[p]) for p in parents):
                    continue
                candidate = own + sum(cost[p] for p in parents if p not in compromised)
            if candidate < cost[sid] - 1e-9:
                cost[sid] = candidate
                changed = True
    return cost


class PathfinderAttacker(AttackerPolicy):
    """Full-information attacker: plans the cheapest work-step route to each
    flag from the sampled TTCs, targets flags in order of increasing path
    cost, and replans when a defense cuts the route."""

    kind = "pathfinder"

    def reset(self, graph, state, rng):
        self._graph = graph
        self._rng = rng
        self._target: str | None = None
        self._needed: set[str] = set()
        self._costs: dict[str, float] = {}
        self._enabled_seen: frozenset[str] = frozenset(state.enabled)
        self._replan(state)

    def select(self, state, surface):
        if not surface:
            return None
        if self._plan_stale(state):
            self._replan(state)
        choice = self._next_on_plan(state, surface)
        if choice is None:
            self._replan(state)
            choice = self._next_on_plan(state, surface)
        if choice is None:
            return _uniform_choice(self._rng, surface)
        return choice

    def _plan_stale(self, state) -> bool:
        if self._target is None:
            return True
        if frozenset(state.enabled) != self._enabled_seen:
            return True
        return self._target in state.captured_flags

    def _next_on_plan(self, state, surface) -> str | None:
        if self._target is None:
            return None
        self._needed -= state.compromised
        candidates = self._needed & surface
        if not candidates:
            return None
        return min(candidates, key=lambda sid: (self._costs.get(sid, math.inf), sid))

    def _replan(self, state) -> None:
        graph = self._graph
        self._enabled_seen = frozenset(state.enabled)
        self._costs = attainment_costs(
            graph, state.remaining_ttc, state.compromised, state.enabled
        )
        reachable = [
            (self._costs[fid], fid)
            for fid in graph.flag_ids
            if fid not in state.captured_flags and math.isfinite(self._costs[fid])
        ]
        if not reachable:
            self._target = None
            self._needed = set()
            return
        _, self._target = min(reachable)
        self._needed = self._needed_set(self._target, state.compromised)

    def _needed_set(self, target: str, compromised: set[str]) -> set[str]:
        """Steps that still have to be compromised on the planned route."""
        graph = self._graph
        needed: set[str] = set()
        stack = [target]
        while stack:
            sid = stack.pop()
            if sid in compromised or sid in needed:
                continue
            needed.add(sid)
            parents = graph.attack_parents(sid)
            if not parents:
                continue
            if graph.step(sid).logic == "or":
                best = min(
                    parents, key=lambda p: (self._costs.get(p, math.inf), p)
                )
                stack.append(best)
            else:
                stack.extend(p for p in parents if p not in compromised)
        return needed


class MixtureAttacker(AttackerPolicy):
    """Draws one of the four base policies uniformly at each episode reset
    and delegates to it for the whole episode."""

    kind = "mixture"

    BASE_KINDS = ("random", "breadth_first", "depth_first", "pathfinder")

    def __init__(self):
        self.active_kind: str | None = None
        self._active: AttackerPolicy | None = None

    def reset(self, graph, state, rng):
        self.active_kind = self.BASE_KINDS[int(rng.integers(len(self.BASE_KINDS)))]
        self._active = make_attacker(self.active_kind)
        self._active.reset(graph, state, rng)

    def select(self, state, surface):
        return self._active.select(state, surface)
