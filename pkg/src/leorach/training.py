"""Centralized-critic actor-critic training for the access protocols.

One update per episode: Monte-Carlo returns, a joint-observation critic as
baseline, per-batch advantage normalization, and a single backward pass
through the whole message graph of the variant.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .mac_env import EnvConfig, LeoRachEnv, SlotOutcome
from .metrics import MetricsRecord, signaling_cost, throughput_and_collision, SignalingCostModel
from .neural import (
    DenseNetworkParams,
    OptimizerState,
    adam_step,
    backward,
    forward,
    init_params,
    log_softmax,
    policy_logit_grad,
)
from .protocols import JointAction, ProtocolAgent, ProtocolConfig, TrafficEntry

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 3000
    gamma: float = 0.0          # actions never move the geometry
    entropy_coef: float = 0.3   # lower values lock into a fixed partition early
    critic_weight: float = 0.5
    learning_rate: float = 1e-3
    critic_hidden: int = 64
    max_grad_norm: float | None = 10.0
    eval_every: int = 500
    eval_episodes: int = 20
    eval_seed: int = 10_000

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.entropy_coef < 0 or self.critic_weight < 0:
            raise ValueError("entropy_coef and critic_weight must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("eval_every and eval_episodes must be >= 1")


@dataclass
class RolloutBuffer:
    observations: np.ndarray  # (N, J, obs_dim)
    targets: np.ndarray       # (N, J)
    log_probs: np.ndarray     # (N, J)
    entropies: np.ndarray     # (N, J)
    rewards: np.ndarray       # (N, J)
    values: np.ndarray        # (N, J)
    outcomes: list[SlotOutcome] = field(default_factory=list)
    traffic: list[list[TrafficEntry]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)


def make_critic(num_users: int, obs_dim: int, hidden: int, seed=None) -> DenseNetworkParams:
    return init_params([num_users * obs_dim, hidden, 1], seed)


def critic_inputs(observations: np.ndarray) -> np.ndarray:
    """(N*J, J*obs_dim) joint views; row (n, j) puts user j's block first."""
    n, J, D = observations.shape
    rows = np.empty((n, J, J * D))
    for j in range(J):
        order = [j] + [k for k in range(J) if k != j]
        rows[:, j] = observations[:, order].reshape(n, -1)
    return rows.reshape(n * J, J * D)


def critic_values(critic: DenseNetworkParams, observations: np.ndarray) -> np.ndarray:
    """Per-user baselines V(s_n seen from user j), shaped (N, J)."""
    n, J, _ = observations.shape
    return forward(critic, critic_inputs(observations))[0].reshape(n, J)


def collect_episode(env: LeoRachEnv, agent: ProtocolAgent, critic: DenseNetworkParams | None,
                    rng: np.random.Generator, greedy: bool = False,
                    start_slot: int | None = None) -> RolloutBuffer:
    """Run one episode of ``joint_act`` -> ``env.step``."""
    obs = env.reset(start_slot)
    all_obs, targets, logps, ents, rewards, outcomes, traffic = [], [], [], [], [], [], []
    while not env.done:
        act: JointAction = agent.joint_act(obs, rng, greedy=greedy)
        outcome = env.step(act.targets)
        all_obs.append(obs)
        targets.append(act.targets)
        logps.append(act.log_probs)
        ents.append(act.entropies)
        rewards.append(outcome.rewards)
        outcomes.append(outcome)
        traffic.append(act.traffic)
        obs = env.observe()
    observations = np.asarray(all_obs)
    values = (critic_values(critic, observations) if critic is not None
              else np.zeros(observations.shape[:2]))
    return RolloutBuffer(observations, np.asarray(targets), np.asarray(logps),
                         np.asarray(ents), np.asarray(rewards, dtype=float), values,
                         outcomes, traffic)


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    """G_n = sum_{t >= n} gamma^(t-n) r_t along axis 0."""
    rewards = np.asarray(rewards, dtype=float)
    out = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    for n in range(len(rewards) - 1, -1, -1):
        running = rewards[n] + gamma * running
        out[n] = running
    return out


def compute_returns(buffer: RolloutBuffer, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-user (returns, normalized advantages), both shaped (N, J)."""
    returns = discounted_returns(buffer.rewards, gamma)
    adv = returns - buffer.values
    if adv.size > 1:
        adv = adv - adv.mean()
        std = adv.std()
        if std > 0:
            adv = adv / std
    return returns, adv


def total_loss(agent: ProtocolAgent, critic: DenseNetworkParams, buffer: RolloutBuffer,
               returns: np.ndarray, advantages: np.ndarray,
               cfg: TrainConfig) -> float:
    """Scalar objective minimized by ``update`` (used for gradient checks)."""
    logits, cache = agent.forward_batch(buffer.observations)
    logp = log_softmax(logits)
    n, J = buffer.targets.shape
    chosen = logp[np.arange(n)[:, None], np.arange(J)[None, :], buffer.targets]
    ent = -np.sum(np.exp(logp) * logp, axis=-1)
    policy = float(np.sum(-chosen * advantages) - cfg.entropy_coef * np.sum(ent))
    v = critic_values(critic, buffer.observations)
    value = cfg.critic_weight * float(np.sum((v - returns) ** 2))
    return policy + value + agent.reconstruction_loss(cache)


def loss_gradients(agent: ProtocolAgent, critic: DenseNetworkParams, buffer: RolloutBuffer,
                   returns: np.ndarray, advantages: np.ndarray, cfg: TrainConfig):
    """Analytic gradients of ``total_loss`` for every segment and the critic."""
    logits, cache = agent.forward_batch(buffer.observations)
    n, J, A = logits.shape
    dlogits = policy_logit_grad(logits.reshape(n * J, A), buffer.targets.reshape(-1),
                                advantages.reshape(-1), cfg.entropy_coef).reshape(n, J, A)
    grads = agent.backward_batch(cache, dlogits)
    v, vcache = forward(critic, critic_inputs(buffer.observations))
    v = v.reshape(n, J)
    dv = (2.0 * cfg.critic_weight * (v - returns)).reshape(n * J, 1)
    critic_grad, _ = backward(critic, vcache, dv)
    ent = -np.sum(np.exp(log_softmax(logits)) * log_softmax(logits), axis=-1)
    stats = {
        "policy_loss": float(np.sum(-buffer.log_probs * advantages)),
        "critic_loss": float(cfg.critic_weight * np.sum((v - returns) ** 2)),
        "mean_entropy": float(ent.mean()),
        "reconstruction_loss": agent.reconstruction_loss(cache),
    }
    return grads, critic_grad, stats


def _clip(grads: list[DenseNetworkParams], max_norm: float | None) -> float:
    norm = float(np.sqrt(sum(np.sum(a * a) for g in grads for a in g.arrays())))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            for a in g.arrays():
                a *= scale
    return norm


def update(agent: ProtocolAgent, critic: DenseNetworkParams, buffer: RolloutBuffer,
           returns: np.ndarray, advantages: np.ndarray,
           optimizers: dict[str, OptimizerState], cfg: TrainConfig) -> dict:
    """One optimizer step on the joint loss; returns diagnostics."""
    grads, critic_grad, stats = loss_gradients(agent, critic, buffer, returns, advantages, cfg)
    if not all(np.isfinite(v) for v in stats.values()):
        raise FloatingPointError(f"non-finite loss: {stats}")
    segs = agent.segments()
    stats["grad_norm"] = _clip(list(grads.values()), cfg.max_grad_norm)
    for name, g in grads.items():
        adam_step(segs[name], g, optimizers[name])
    _clip([critic_grad], cfg.max_grad_norm)
    adam_step(critic, critic_grad, optimizers["critic"])
    return stats


def make_optimizers(agent: ProtocolAgent, critic: DenseNetworkParams,
                    lr: float) -> dict[str, OptimizerState]:
    opts = {name: OptimizerState.for_params(p, lr=lr) for name, p in agent.segments().items()}
    opts["critic"] = OptimizerState.for_params(critic, lr=lr)
    return opts


def random_policy_targets(num_users: int, num_actions: int, rng: np.random.Generator):
    return rng.integers(0, num_actions, size=num_users)


def evaluate(agent: ProtocolAgent | None, env_config: EnvConfig, episodes: int,
             seed: int, greedy: bool = True) -> tuple[float, float, list[SlotOutcome]]:
    """Average throughput / collision % over fresh, seeded episodes.

    ``agent=None`` evaluates the uniform-random policy over {0, ..., K}.
    """
    env = LeoRachEnv(_with_seed(env_config, seed))
    rng = np.random.default_rng(seed + 1)
    outcomes: list[SlotOutcome] = []
    for _ in range(episodes):
        obs = env.reset()
        while not env.done:
            if agent is None:
                targets = random_policy_targets(env.num_users, env.num_satellites + 1, rng)
            else:
                targets = agent.joint_act(obs, rng, greedy=greedy).targets
            outcomes.append(env.step(targets))
            obs = env.observe()
    thr, col = throughput_and_collision(outcomes)
    return thr, col, outcomes


def _with_seed(env_config: EnvConfig, seed: int) -> EnvConfig:
    from dataclasses import replace
    return replace(env_config, rng_seed=int(seed))


@dataclass
class TrainResult:
    agent: ProtocolAgent
    critic: DenseNetworkParams
    history: list[MetricsRecord]
    evaluations: list[MetricsRecord]
    best_segments: dict[str, DenseNetworkParams]
    best_eval_throughput: float


def train(env_config: EnvConfig, protocol: ProtocolConfig, cfg: TrainConfig, seed: int,
          cost_model: SignalingCostModel | None = None) -> TrainResult:
    """Train one variant from scratch; deterministic per ``seed``."""
    ss = np.random.SeedSequence(seed)
    env_ss, agent_ss, act_ss, critic_ss = ss.spawn(4)
    env = LeoRachEnv(_with_seed(env_config, int(env_ss.generate_state(1)[0])))
    J, K = env.num_users, env.num_satellites
    agent = ProtocolAgent(protocol, J, env.obs_dim, K + 1, seed=agent_ss)
    critic = make_critic(J, env.obs_dim, cfg.critic_hidden, seed=critic_ss)
    optimizers = make_optimizers(agent, critic, cfg.learning_rate)
    act_rng = np.random.default_rng(act_ss)
    cost_model = cost_model or SignalingCostModel.from_protocol(protocol)
    bits = signaling_cost(protocol.variant, J, cost_model)

    history: list[MetricsRecord] = []
    evaluations: list[MetricsRecord] = []
    best_thr, best = -np.inf, {k: v.copy() for k, v in agent.segments().items()}
    for episode in range(cfg.episodes):
        buf = collect_episode(env, agent, critic, act_rng)
        returns, adv = compute_returns(buf, cfg.gamma)
        update(agent, critic, buf, returns, adv, optimizers, cfg)
        thr, col = throughput_and_collision(buf.outcomes)
        history.append(MetricsRecord(thr, col, bits, episode, protocol.variant, seed))
        last = episode == cfg.episodes - 1
        if (episode + 1) % cfg.eval_every == 0 or last:
            e_thr, e_col, _ = evaluate(agent, env_config, cfg.eval_episodes, cfg.eval_seed)
            evaluations.append(MetricsRecord(e_thr, e_col, bits, episode,
                                             protocol.variant, seed))
            log.debug("%s seed=%d ep=%d eval thr=%.4g col=%.2f",
                      protocol.variant, seed, episode, e_thr, e_col)
            if e_thr > best_thr:
                best_thr = e_thr
                best = {k: v.copy() for k, v in agent.segments().items()}
    return TrainResult(agent, critic, history, evaluations, best, float(best_thr))
