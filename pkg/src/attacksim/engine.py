"""Attack-defend capture-the-flag episode engine.

Discrete time-steps; attacker and defender act within the same step, with
the defender's action resolving first so a freshly enabled defense blocks
work on its children immediately. Per-step time-to-compromise budgets are
sampled once per episode from exponential distributions; the defender sees
the attack state only through a noisy IDS observation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import AttackGraph, RewardConfig, attack_surface, validate

# stream contexts keep evaluation, training and ad-hoc rollouts on disjoint
# RNG streams even when they share a master seed
CONTEXT_EVAL = 0
CONTEXT_TRAIN = 1


@dataclass(frozen=True)
class NoiseConfig:
    """IDS error rates. fpr = P(bit reads 1 | step not compromised),
    fnr = P(bit reads 0 | step compromised)."""

    fpr: float
    fnr: float

    def __post_init__(self):
        if not 0 <= self.fpr <= 1:
            raise ValueError(f"fpr must be in [0, 1], got {self.fpr}")
        if not 0 <= self.fnr <= 1:
            raise ValueError(f"fnr must be in [0, 1], got {self.fnr}")


@dataclass(frozen=True)
class Observation:
    """Defender's view: noisy attack-step bits plus exact defense-step bits,
    in graph index order."""

    attack_bits: np.ndarray
    defense_bits: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.attack_bits, self.defense_bits]).astype(np.float64)

    def bitstring(self) -> str:
        return "".join(str(int(b)) for b in self.attack_bits) + "".join(
            str(int(b)) for b in self.defense_bits
        )


@dataclass
class SimState:
    """Mutable per-episode state, owned by exactly one episode runner."""

    graph: AttackGraph
    noise: NoiseConfig
    rewards: RewardConfig
    t: int
    remaining_ttc: dict[str, float]
    compromised: set[str]
    enabled: set[str]
    captured_flags: set[str]
    rng: np.random.Generator


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    observation: Observation
    done: bool
    flags_captured_now: frozenset[str]


@dataclass(frozen=True)
class StepRow:
    t: int
    attacker_action: str | None
    defender_action: str | None
    reward: float
    done: bool
    observation: str


@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    steps: list[StepRow]
    cumulative_reward: float
    flags_captured: frozenset[str]
    flags_fraction: float
    length: int
    truncated: bool
    sampled_ttc: dict[str, float] = field(default_factory=dict)


TRAJECTORY_COLUMNS = ("t", "attacker_action", "defender_action", "reward", "done", "observation")


def episode_streams(
    seed: int, episode: int, context: int = CONTEXT_EVAL
) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent (environment, attacker, defender) generators for one
    episode, derived from (seed, context, episode index) so parallel and
    serial execution produce identical per-episode results."""
    root = np.random.SeedSequence((int(seed), int(context), int(episode)))
    env_ss, attacker_ss, defender_ss = root.spawn(3)
    return (
        np.random.default_rng(env_ss),
        np.random.default_rng(attacker_ss),
        np.random.default_rng(defender_ss),
    )


def sample_ttc(graph: AttackGraph, rng: np.random.Generator) -> dict[str, float]:
    """Per-step time-to-compromise draws: exponential with the step's mean,
    except steps with mean 0 which always sample exactly 0."""
    means = np.array([s.ttc_mean for s in graph.attack_steps], dtype=np.float64)
    draws = rng.exponential(scale=np.where(means > 0, means, 1.0))
    draws = np.where(means > 0, draws, 0.0)
    return {s.id: float(draws[i]) for i, s in enumerate(graph.attack_steps)}


def init_episode(
    graph: AttackGraph,
    noise: NoiseConfig,
    rewards: RewardConfig,
    seed: int | np.random.Generator,
    episode: int = 0,
    context: int = CONTEXT_EVAL,
) -> SimState:
    """Fresh episode state: only the entry step compromised, no defenses
    enabled, TTCs sampled. `seed` may be a master seed (the environment
    stream is derived from it) or an already-derived Generator."""
    violations = validate(graph)
    if violations:
        raise ValueError(f"invalid graph: {violations}")
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = episode_streams(seed, episode, context)[0]
    return SimState(
        graph=graph,
        noise=noise,
        rewards=rewards,
        t=0,
        remaining_ttc=sample_ttc(graph, rng),
        compromised={graph.entry_id},
        enabled=set(),
        captured_flags=set(),
        rng=rng,
    )


def observe(
    state: SimState, noise: NoiseConfig | None = None, rng: np.random.Generator | None = None
) -> Observation:
    """Noisy attack bits and exact defense bits; fresh noise every call."""
    graph = state.graph
    noise = state.noise if noise is None else noise
    rng = state.rng if rng is None else rng
    truth = np.fromiter(
        (sid in state.compromised for sid in graph.attack_ids),
        dtype=bool,
        count=graph.num_attack_steps,
    )
    u = rng.random(graph.num_attack_steps)
    attack_bits = np.where(truth, u >= noise.fnr, u < noise.fpr).astype(np.uint8)
    defense_bits = np.fromiter(
        (did in state.enabled for did in graph.defense_ids),
        dtype=np.uint8,
        count=graph.num_defense_steps,
    )
    return Observation(attack_bits=attack_bits, defense_bits=defense_bits)


def reward_of(
    state: SimState, flags_captured_now: set[str] | frozenset[str], rewards: RewardConfig
) -> float:
    """Defender reward for one time-step: upkeep for every enabled defense
    plus a one-time penalty for each flag captured this step."""
    return -(
        len(state.enabled) * rewards.defense_cost
        + len(flags_captured_now) * rewards.flag_cost
    )


def step(
    state: SimState,
    attacker_action: str | None,
    defender_action: str | None,
    surface: set[str] | None = None,
) -> StepOutcome:
    """Advance one time-step.

    The defender's enable resolves before the attacker's work, so a step
    blocked this very step cannot be compromised. The attacker's action must
    come from the surface as it stood when actions were chosen (pass it via
    `surface` to avoid recomputation); the engine enforces both masks.
    """
    graph = state.graph
    if surface is None:
        surface = attack_surface(graph, state.compromised, state.enabled)

    if attacker_action is None:
        if surface:
            raise ValueError("attacker must act while the attack surface is non-empty")
    elif attacker_action not in surface:
        raise ValueError(f"attacker action {attacker_action!r} is not on the attack surface")
    if defender_action is not None:
        if defender_action not in graph.defense_index:
            raise ValueError(f"unknown defense step {defender_action!r}")
        if defender_action in state.enabled:
            raise ValueError(f"defense step {defender_action!r} is already enabled")

    # 1) defense enables; its children leave the surface and, if compromised,
    #    are no longer considered compromised (the flag penalty is not refunded)
    if defender_action is not None:
        state.enabled.add(defender_action)
        for child in graph.children(defender_action):
            state.compromised.discard(child)

    # 2) attacker works its chosen step unless the defender's move just
    #    removed it from the surface
    flags_now: set[str] = set()
    if attacker_action is not None:
        still_workable = (
            attacker_action
            in attack_surface(graph, state.compromised, state.enabled)
            if defender_action is not None
            else True
        )
        if still_workable:
            state.remaining_ttc[attacker_action] -= 1.0
            if state.remaining_ttc[attacker_action] <= 0.0:
                state.compromised.add(attacker_action)
                if (
                    graph.step(attacker_action).is_flag
                    and attacker_action not in state.captured_flags
                ):
                    state.captured_flags.add(attacker_action)
                    flags_now.add(attacker_action)

    # 3) reward, 4) next observation, 5) termination
    reward = reward_of(state, flags_now, state.rewards)
    observation = observe(state)
    done = not attack_surface(graph, state.compromised, state.enabled)
    state.t += 1
    return StepOutcome(
        reward=reward,
        observation=observation,
        done=done,
        flags_captured_now=frozenset(flags_now),
    )


def min_reward_bound(graph: AttackGraph, rewards: RewardConfig, episode_len: int) -> float:
    """Lower bound on the cumulative episode reward: the defender enables one
    defense per step from the start and every flag is still captured.
    Requires episode_len >= |D| (one enable per step)."""
    num_defenses = graph.num_defense_steps
    if episode_len < num_defenses:
        raise ValueError(
            f"episode_len must be >= number of defenses ({num_defenses}), got {episode_len}"
        )
    ramp = num_defenses * (num_defenses - 1) // 2
    plateau = num_defenses * (episode_len - (num_defenses - 1))
    return -rewards.defense_cost * (ramp + plateau) - rewards.flag_cost * len(graph.flag_ids)


def default_step_cap(graph: AttackGraph) -> int:
    """Hard episode cap guarding against pathological configs; generously
    above the worst-case termination bound for sane graphs."""
    return int(math.ceil(10 * (graph.num_attack_steps + graph.total_ttc())))


def run_episode(
    graph: AttackGraph,
    attacker,
    defender,
    noise: NoiseConfig,
    rewards: RewardConfig,
    seed: int,
    episode: int = 0,
    context: int = CONTEXT_EVAL,
    max_steps: int | None = None,
) -> EpisodeRecord:
    """Run one full episode and return its trajectory and totals.

    Deterministic for a fixed (seed, episode, context) and deterministic
    policies: the environment, attacker and defender draw from independent
    derived streams.
    """
    env_rng, attacker_rng, defender_rng = episode_streams(seed, episode, context)
    state = init_episode(graph, noise, rewards, env_rng)
    attacker.reset(graph, state, attacker_rng)
    defender.reset(graph, defender_rng)
    cap = default_step_cap(graph) if max_steps is None else max_steps

    obs = observe(state)
    rows: list[StepRow] = []
    cumulative = 0.0
    truncated = False
    sampled = dict(state.remaining_ttc)
    while True:
        surface = attack_surface(graph, state.compromised, state.enabled)
        attacker_action = attacker.select(state, surface) if surface else None
        mask = tuple(d for d in graph.defense_ids if d not in state.enabled)
        defender_action = defender.select(obs, mask)
        t = state.t
        outcome = step(state, attacker_action, defender_action, surface=surface)
        cumulative += outcome.reward
        rows.append(
            StepRow(
                t=t,
                attacker_action=attacker_action,
                defender_action=defender_action,
                reward=outcome.reward,
                done=outcome.done,
                observation=outcome.observation.bitstring(),
            )
        )
        obs = outcome.observation
        if outcome.done:
            break
        if len(rows) >= cap:
            truncated = True
            break

    num_flags = len(graph.flag_ids)
    return EpisodeRecord(
        seed=seed,
        episode=episode,
        steps=rows,
        cumulative_reward=cumulative,
        flags_captured=frozenset(state.captured_flags),
        flags_fraction=len(state.captured_flags) / num_flags if num_flags else 0.0,
        length=len(rows),
        truncated=truncated,
        sampled_ttc=sampled,
    )


def write_trajectory(record: EpisodeRecord, path) -> None:
    """One CSV row per time-step: t, actions, reward, done and the
    observation bit-string (attack bits then defense bits)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in record.steps:
            writer.writerow(
                [
                    row.t,
                    row.attacker_action or "",
                    row.defender_action or "",
                    repr(row.reward),
                    int(row.done),
                    row.observation,
                ]
            )
