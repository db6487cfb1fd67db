"""From-scratch policy-gradient learner for the defender.

A two-hidden-layer tanh MLP (shared trunk, softmax policy head over the
defenses plus no-op, linear value head) trained with the clipped surrogate
objective, a clipped value loss, an entropy bonus and a fixed-coefficient KL
penalty against the behavior policy. Gradients are hand-derived
backpropagation over numpy arrays; optimization is plain minibatch SGD.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .graph import AttackGraph, RewardConfig, attack_surface
from . import engine
from .engine import NoiseConfig, episode_streams

HIDDEN_LAYERS = (128, 128)


@dataclass
class HyperParams:
    """Training knobs. The discount and advantage-smoothing factors are not
    part of the tuned set and default to common practice."""

    k_vf: float = 1e-3
    k_s: float = 0.0
    k_kl: float = 1.0
    train_batch: int = 2046
    minibatch: int = 256
    vf_clip: float = 500.0
    clip_eps: float = 0.02
    lr: float = 1e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    iterations: int = 500


@dataclass
class PolicyParams:
    """MLP weights for one graph: input |A|+|D|, policy head |D|+1, value
    head 1. Row-major weight matrices, applied as x @ w + b."""

    num_attack_steps: int
    num_defense_steps: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray
    bp: np.ndarray
    wv: np.ndarray
    bv: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.num_attack_steps + self.num_defense_steps

    @property
    def action_dim(self) -> int:
        return self.num_defense_steps + 1

    @property
    def hidden_dims(self) -> tuple[int, int]:
        return (self.w1.shape[1], self.w2.shape[1])

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            name: getattr(self, name)
            for name in ("w1", "b1", "w2", "b2", "wp", "bp", "wv", "bv")
        }

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            self.num_attack_steps,
            self.num_defense_steps,
            **{k: v.copy() for k, v in self.arrays().items()},
        )


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).astype(np.float64)


def init_params(
    num_attack_steps: int,
    num_defense_steps: int,
    rng: np.random.Generator,
    hidden: tuple[int, int] = HIDDEN_LAYERS,
) -> PolicyParams:
    """Orthogonally initialized trunk with small-gain output heads."""
    input_dim = num_attack_steps + num_defense_steps
    action_dim = num_defense_steps + 1
    h1, h2 = hidden
    return PolicyParams(
        num_attack_steps=num_attack_steps,
        num_defense_steps=num_defense_steps,
        w1=_orthogonal(rng, input_dim, h1, gain=np.sqrt(2.0)),
        b1=np.zeros(h1),
        w2=_orthogonal(rng, h1, h2, gain=np.sqrt(2.0)),
        b2=np.zeros(h2),
        wp=_orthogonal(rng, h2, action_dim, gain=0.01),
        bp=np.zeros(action_dim),
        wv=_orthogonal(rng, h2, 1, gain=1.0),
        bv=np.zeros(1),
    )


def forward(params: PolicyParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | float]:
    """Policy logits and value estimate; accepts one input vector or a
    batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.input_dim:
        raise ValueError(f"input width {x.shape[1]} != |A|+|D| = {params.input_dim}")
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    logits = h2 @ params.wp + params.bp
    value = (h2 @ params.wv + params.bv)[:, 0]
    if single:
        return logits[0], float(value[0])
    return logits, value


def legal_action_mask(defense_ids: tuple[str, ...], disabled: tuple[str, ...]) -> np.ndarray:
    """Boolean mask over the |D|+1 actions; the trailing no-op is always
    legal."""
    disabled_set = set(disabled)
    legal = np.zeros(len(defense_ids) + 1, dtype=bool)
    for i, did in enumerate(defense_ids):
        legal[i] = did in disabled_set
    legal[-1] = True
    return legal


def masked_log_softmax(logits: np.ndarray, legal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(probs, log-probs) of the categorical restricted to legal actions;
    illegal actions get exactly zero probability and -inf log-probability."""
    logits = np.asarray(logits, dtype=np.float64)
    masked = np.where(legal, logits, -np.inf)
    zmax = np.max(masked, axis=-1, keepdims=True)
    shifted = masked - zmax
    ez = np.where(legal, np.exp(shifted), 0.0)
    total = ez.sum(axis=-1, keepdims=True)
    probs = ez / total
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(legal, shifted - np.log(total), -np.inf)
    return probs, logp


def masked_entropy(probs: np.ndarray, logp: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        contrib = np.where(probs > 0, probs * logp, 0.0)
    return -contrib.sum(axis=-1)


def sample_action(probs: np.ndarray, legal: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an action index from a masked categorical; never returns an
    illegal action even under cumulative-sum float edge cases."""
    r = float(rng.random())
    cumulative = np.cumsum(probs)
    action = int(np.searchsorted(cumulative, r, side="right"))
    if action >= probs.shape[0] or not legal[action]:
        action = int(np.flatnonzero(legal)[-1])
    return action


@dataclass
class TrajectoryBatch:
    """Whole-episode rollout data plus derived GAE advantages and returns.
    Advantages are normalized per batch (zero mean, unit variance)."""

    obs: np.ndarray
    actions: np.ndarray
    logp_old: np.ndarray
    rewards: np.ndarray
    values_old: np.ndarray
    dones: np.ndarray
    legal: np.ndarray
    probs_old: np.ndarray
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return self.obs.shape[0]

    def subset(self, idx: np.ndarray) -> "TrajectoryBatch":
        return TrajectoryBatch(
            obs=self.obs[idx],
            actions=self.actions[idx],
            logp_old=self.logp_old[idx],
            rewards=self.rewards[idx],
            values_old=self.values_old[idx],
            dones=self.dones[idx],
            legal=self.legal[idx],
            probs_old=self.probs_old[idx],
            advantages=self.advantages[idx],
            returns=self.returns[idx],
        )

    def finalize(self, gamma: float, gae_lambda: float) -> None:
        adv, ret = gae_advantages(self.rewards, self.values_old, self.dones, gamma, gae_lambda)
        self.returns = ret
        std = adv.std()
        self.advantages = (adv - adv.mean()) / (std if std > 1e-8 else 1.0)


def gae_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    gae_lambda: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage recursion truncated at episode boundaries;
    the batch must consist of whole episodes (its last step is terminal).
    Returns (advantages, returns) with returns = advantages + values."""
    n = len(rewards)
    advantages = np.zeros(n, dtype=np.float64)
    running = 0.0
    for t in range(n - 1, -1, -1):
        if dones[t]:
            next_value = 0.0
            running = 0.0
        else:
            next_value = values[t + 1]
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * gae_lambda * running
        advantages[t] = running
    return advantages, advantages + values


def _check_finite(name: str, value, diagnostics: dict) -> None:
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"non-finite {name} in PPO update; diagnostics: {diagnostics}")


def _loss_pieces(params: PolicyParams, batch: TrajectoryBatch, hp: HyperParams):
    logits, values = forward(params, batch.obs)
    probs, logp_all = masked_log_softmax(logits, batch.legal)
    n = len(batch)
    rows = np.arange(n)
    logp = logp_all[rows, batch.actions]
    ratio = np.exp(logp - batch.logp_old)
    adv = batch.advantages

    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps) * adv
    policy_loss = -np.mean(np.minimum(unclipped, clipped))

    verr = (values - batch.returns) ** 2
    vf_loss = np.mean(np.minimum(verr, hp.vf_clip))

    entropy = np.mean(masked_entropy(probs, logp_all))

    with np.errstate(divide="ignore"):
        logp_old_all = np.where(batch.probs_old > 0, np.log(batch.probs_old), 0.0)
    logp_cur_safe = np.where(batch.probs_old > 0, logp_all, 0.0)
    kl_terms = batch.probs_old * (logp_old_all - logp_cur_safe)
    kl = np.mean(kl_terms.sum(axis=-1))

    loss = policy_loss + hp.k_vf * vf_loss - hp.k_s * entropy + hp.k_kl * kl
    diagnostics = {
        "policy_loss": float(policy_loss),
        "vf_loss": float(vf_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(batch.logp_old - logp)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > hp.clip_eps)),
    }
    _check_finite("loss", loss, diagnostics)
    internals = (logits, values, probs, logp_all, logp, ratio, unclipped, clipped)
    return loss, diagnostics, internals


def ppo_loss(params: PolicyParams, batch: TrajectoryBatch, hp: HyperParams):
    """Scalar training loss and diagnostics for a batch whose stored
    log-probabilities come from the behavior-policy snapshot."""
    loss, diagnostics, _ = _loss_pieces(params, batch, hp)
    return float(loss), diagnostics


def ppo_loss_and_grads(params: PolicyParams, batch: TrajectoryBatch, hp: HyperParams):
    """Loss, diagnostics and hand-backpropagated gradients for every
    parameter array."""
    loss, diagnostics, internals = _loss_pieces(params, batch, hp)
    logits, values, probs, logp_all, logp, ratio, unclipped, clipped = internals
    n = len(batch)
    rows = np.arange(n)
    adv = batch.advantages

    # policy term: gradient flows only where the unclipped branch is active
    active = unclipped <= clipped
    g_pol = np.where(active, adv * ratio, 0.0) * (-1.0 / n)
    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    dlogits = g_pol[:, None] * (onehot - probs)

    # entropy bonus (weight k_s, subtracted from the loss)
    if hp.k_s != 0.0:
        entropy_per = masked_entropy(probs, logp_all)
        logp_safe = np.where(probs > 0, logp_all, 0.0)
        dlogits += (hp.k_s / n) * probs * (logp_safe + entropy_per[:, None])

    # fixed-coefficient KL(behavior || current)
    if hp.k_kl != 0.0:
        dlogits += (hp.k_kl / n) * (probs - batch.probs_old)

    # clipped value loss
    verr = (values - batch.returns) ** 2
    dvalues = np.where(verr < hp.vf_clip, 2.0 * (values - batch.returns), 0.0) * (
        hp.k_vf / n
    )

    x = np.asarray(batch.obs, dtype=np.float64)
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)

    grads = {}
    grads["wp"] = h2.T @ dlogits
    grads["bp"] = dlogits.sum(axis=0)
    grads["wv"] = h2.T @ dvalues[:, None]
    grads["bv"] = np.array([dvalues.sum()])
    dh2 = dlogits @ params.wp.T + dvalues[:, None] @ params.wv.T
    dpre2 = dh2 * (1.0 - h2**2)
    grads["w2"] = h1.T @ dpre2
    grads["b2"] = dpre2.sum(axis=0)
    dh1 = dpre2 @ params.w2.T
    dpre1 = dh1 * (1.0 - h1**2)
    grads["w1"] = x.T @ dpre1
    grads["b1"] = dpre1.sum(axis=0)

    for name, grad in grads.items():
        _check_finite(f"gradient {name}", grad, diagnostics)
    return float(loss), diagnostics, grads


def sgd_update(
    params: PolicyParams,
    batch: TrajectoryBatch,
    hp: HyperParams,
    rng: np.random.Generator,
) -> PolicyParams:
    """One pass of minibatch SGD over a shuffled batch; returns updated
    parameters (the input is left untouched)."""
    updated = params.copy()
    order = rng.permutation(len(batch))
    for start in range(0, len(order), hp.minibatch):
        mb = batch.subset(order[start : start + hp.minibatch])
        _, _, grads = ppo_loss_and_grads(updated, mb, hp)
        for name, grad in grads.items():
            getattr(updated, name)[...] -= hp.lr * grad
    return updated


# ---------------------------------------------------------------------------
# rollout collection and the training loop
# ---------------------------------------------------------------------------

_CTX_INIT = 2
_CTX_SHUFFLE = 3


def collect_batch(
    graph: AttackGraph,
    params: PolicyParams,
    attacker,
    noise: NoiseConfig,
    rewards: RewardConfig,
    hp: HyperParams,
    seed: int,
    first_episode: int,
) -> tuple[TrajectoryBatch, dict]:
    """Roll whole episodes with the current stochastic policy until at least
    hp.train_batch steps are gathered."""
    defense_ids = graph.defense_ids
    obs_rows, action_rows, logp_rows, reward_rows = [], [], [], []
    value_rows, done_rows, legal_rows, prob_rows = [], [], [], []
    episode_rewards, episode_flags = [], []
    episode = first_episode
    cap = engine.default_step_cap(graph)

    while len(obs_rows) < hp.train_batch:
        env_rng, attacker_rng, defender_rng = episode_streams(
            seed, episode, engine.CONTEXT_TRAIN
        )
        state = engine.init_episode(graph, noise, rewards, env_rng)
        attacker.reset(graph, state, attacker_rng)
        obs_vec = engine.observe(state).vector()
        total = 0.0
        steps = 0
        while True:
            surface = attack_surface(graph, state.compromised, state.enabled)
            attacker_action = attacker.select(state, surface) if surface else None
            mask = tuple(d for d in defense_ids if d not in state.enabled)
            legal = legal_action_mask(defense_ids, mask)
            logits, value = forward(params, obs_vec)
            probs, logp_all = masked_log_softmax(logits, legal)
            action = sample_action(probs, legal, defender_rng)
            defender_action = defense_ids[action] if action < len(defense_ids) else None

            outcome = engine.step(state, attacker_action, defender_action, surface=surface)
            steps += 1
            done = outcome.done or steps >= cap

            obs_rows.append(obs_vec)
            action_rows.append(action)
            logp_rows.append(logp_all[action])
            reward_rows.append(outcome.reward)
            value_rows.append(value)
            done_rows.append(done)
            legal_rows.append(legal)
            prob_rows.append(probs)
            total += outcome.reward
            obs_vec = outcome.observation.vector()
            if done:
                break
        episode_rewards.append(total)
        num_flags = len(graph.flag_ids)
        episode_flags.append(
            len(state.captured_flags) / num_flags if num_flags else 0.0
        )
        episode += 1

    batch = TrajectoryBatch(
        obs=np.array(obs_rows, dtype=np.float64),
        actions=np.array(action_rows, dtype=np.int64),
        logp_old=np.array(logp_rows, dtype=np.float64),
        rewards=np.array(reward_rows, dtype=np.float64),
        values_old=np.array(value_rows, dtype=np.float64),
        dones=np.array(done_rows, dtype=bool),
        legal=np.array(legal_rows, dtype=bool),
        probs_old=np.array(prob_rows, dtype=np.float64),
    )
    batch.finalize(hp.gamma, hp.gae_lambda)
    stats = {
        "episodes": episode - first_episode,
        "mean_episode_reward": float(np.mean(episode_rewards)),
        "mean_flags_captured": float(np.mean(episode_flags)),
    }
    return batch, stats


@dataclass
class CurvePoint:
    iteration: int
    mean_episode_reward: float
    mean_flags_captured: float
    approx_kl: float
    clip_fraction: float


def train(
    graph: AttackGraph,
    attacker,
    noise: NoiseConfig,
    rewards: RewardConfig,
    hp: HyperParams,
    seed: int,
) -> tuple[PolicyParams, list[CurvePoint]]:
    """Full training run: collect, estimate advantages, update; one curve
    point per iteration. Deterministic for a fixed seed."""
    init_rng = np.random.default_rng(np.random.SeedSequence((int(seed), _CTX_INIT)))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((int(seed), _CTX_SHUFFLE)))
    params = init_params(graph.num_attack_steps, graph.num_defense_steps, init_rng)

    curve: list[CurvePoint] = []
    episode_counter = 0
    for iteration in range(hp.iterations):
        batch, stats = collect_batch(
            graph, params, attacker, noise, rewards, hp, seed, episode_counter
        )
        episode_counter += stats["episodes"]
        params = sgd_update(params, batch, hp, shuffle_rng)
        _, diagnostics = ppo_loss(params, batch, hp)
        curve.append(
            CurvePoint(
                iteration=iteration,
                mean_episode_reward=stats["mean_episode_reward"],
                mean_flags_captured=stats["mean_flags_captured"],
                approx_kl=diagnostics["approx_kl"],
                clip_fraction=diagnostics["clip_fraction"],
            )
        )
    return params, curve


def write_curve(curve: list[CurvePoint], path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "mean_episode_reward", "mean_flags_captured", "approx_kl", "clip_fraction"]
        )
        for point in curve:
            writer.writerow(
                [
                    point.iteration,
                    repr(point.mean_episode_reward),
                    repr(point.mean_flags_captured),
                    repr(point.approx_kl),
                    repr(point.clip_fraction),
                ]
            )


# ---------------------------------------------------------------------------
# policy file format: shape header, flat row-major weights, provenance
# ---------------------------------------------------------------------------


def save_policy(
    params: PolicyParams,
    path,
    seed: int | None = None,
    hp: HyperParams | None = None,
) -> None:
    doc = {
        "num_attack_steps": params.num_attack_steps,
        "num_defense_steps": params.num_defense_steps,
        "hidden_layers": list(params.hidden_dims),
        "seed": seed,
        "hyperparams": asdict(hp) if hp is not None else None,
        "weights": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.arrays().items()
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_policy(path) -> PolicyParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        weights = {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in doc["weights"].items()
        }
        return PolicyParams(
            num_attack_steps=int(doc["num_attack_steps"]),
            num_defense_steps=int(doc["num_defense_steps"]),
            **weights,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed policy file {path}: {exc}") from exc
