"""DDPG for one-step episodes: the critic regresses on the immediate reward."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from windbid.agent.nn import ACTIVATIONS, Adam, Mlp, soft_update
from windbid.errors import DimensionMismatch

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LOG_COLUMNS = ("step", "mean_reward", "critic_loss", "actor_objective", "sigma")


@dataclass(frozen=True)
class AgentConfig:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.005
    batch_size: int = 64
    buffer_capacity: int = 100_000
    sigma: float = 0.2
    sigma_decay: float = 0.999
    hidden: Tuple[int, ...] = (16, 16, 16)
    activation: str = "relu"
    seed: int = 0
    target_networks: bool = False
    log_every: int = 100
    checkpoint_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.actor_lr < 0 or self.critic_lr < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.sigma < 0 or not 0 <= self.sigma_decay <= 1:
            raise ValueError("sigma must be nonnegative and its decay within [0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class ReplayBuffer:
    """Fixed-capacity ring of (observation, action, reward) transitions."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward):
        i = self._next
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, fewer than batch size {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx]


class Agent:
    def __init__(self, obs_dim: int, act_dim: int, config: AgentConfig = AgentConfig()):
        self.config = config
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        init_seq, noise_seq, sample_seq = np.random.SeedSequence(config.seed).spawn(3)
        init = np.random.default_rng(init_seq)
        self.actor = Mlp([obs_dim, *config.hidden, act_dim], config.activation, "sigmoid", init)
        self.critic = Mlp([obs_dim + act_dim, *config.hidden, 1], config.activation, "identity", init)
        self.target_actor = self.actor.copy() if config.target_networks else None
        self.target_critic = self.critic.copy() if config.target_networks else None
        self.actor_opt = Adam(self.actor.params, config.actor_lr)
        self.critic_opt = Adam(self.critic.params, config.critic_lr)
        self.noise_rng = np.random.default_rng(noise_seq)
        self.sample_rng = np.random.default_rng(sample_seq)
        self.sigma = config.sigma

    def act(self, obs) -> np.ndarray:
        return actor_forward(self.actor, obs)

    def finite(self) -> bool:
        nets = [self.actor, self.critic, self.target_actor, self.target_critic]
        return all(n.all_finite() for n in nets if n is not None)


def actor_forward(net: Mlp, obs) -> np.ndarray:
    return net.forward(obs)


def critic_forward(net: Mlp, obs, action) -> float:
    obs = np.asarray(obs, dtype=float)
    action = np.asarray(action, dtype=float)
    if obs.ndim != 1 or action.ndim != 1:
        raise DimensionMismatch("critic_forward takes a single observation and action")
    return float(net.forward(np.concatenate([obs, action]))[0])


def act_with_noise(agent: Agent, obs, sigma: float, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    a = agent.act(obs)
    if sigma == 0:
        return a
    rng = agent.noise_rng if rng is None else rng
    return np.clip(a + rng.normal(0.0, sigma, size=a.shape), 0.0, 1.0)


def train_step(agent: Agent, buffer: ReplayBuffer, config: Optional[AgentConfig] = None):
    """One critic regression step and one deterministic policy-gradient step.

    Episodes last one step, so the critic target is the reward itself.
    Returns (critic loss before the update, mean Q of the actor's actions).
    """
    config = agent.config if config is None else config
    obs, act, rew = buffer.sample(config.batch_size, agent.sample_rng)
    B = obs.shape[0]
    q, cache = agent.critic.forward(np.hstack([obs, act]), cache=True)
    err = q[:, 0] - rew
    critic_loss = float(np.mean(err * err))
    grads, _ = agent.critic.backward(cache, (2.0 / B) * err[:, None])
    agent.critic_opt.step(grads)

    a_pi, a_cache = agent.actor.forward(obs, cache=True)
    q_pi, q_cache = agent.critic.forward(np.hstack([obs, a_pi]), cache=True)
    _, dq_dinput = agent.critic.backward(q_cache, np.full((B, 1), 1.0 / B))
    actor_grads, _ = agent.actor.backward(a_cache, dq_dinput[:, agent.obs_dim:])
    agent.actor_opt.step(actor_grads, ascent=True)

    if config.target_networks:
        soft_update(agent.target_critic, agent.critic, config.tau)
        soft_update(agent.target_actor, agent.actor, config.tau)
    return critic_loss, float(q_pi.mean())


def save_agent(agent: Agent, path, step: Optional[int] = None):
    doc = {"format": "windbid-ddpg", "version": CHECKPOINT_VERSION, "step": step,
           "obs_dim": agent.obs_dim, "act_dim": agent.act_dim, "sigma": agent.sigma,
           "config": agent.config.to_dict(), "actor": agent.actor.to_dict(),
           "critic": agent.critic.to_dict()}
    if agent.target_actor is not None:
        doc["target_actor"] = agent.target_actor.to_dict()
        doc["target_critic"] = agent.target_critic.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_agent(path) -> Agent:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "windbid-ddpg" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a supported agent checkpoint")
    agent = Agent(doc["obs_dim"], doc["act_dim"], AgentConfig(**doc["config"]))
    agent.actor = Mlp.from_dict(doc["actor"])
    agent.critic = Mlp.from_dict(doc["critic"])
    if "target_actor" in doc:
        agent.target_actor = Mlp.from_dict(doc["target_actor"])
        agent.target_critic = Mlp.from_dict(doc["target_critic"])
    agent.actor_opt = Adam(agent.actor.params, agent.config.actor_lr)
    agent.critic_opt = Adam(agent.critic.params, agent.config.critic_lr)
    agent.sigma = doc["sigma"]
    return agent


@dataclass
class TrainingLog:
    rows: List[dict] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# " + ", ".join(LOG_COLUMNS) + ": step count, mean reward over the last window, "
                     "last critic MSE, last mean Q of actor actions, exploration sigma\n")
            w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
            w.writeheader()
            for row in self.rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def train(env, config: AgentConfig, n_steps: int, checkpoint_path=None,
          agent: Optional[Agent] = None) -> Tuple[Agent, TrainingLog]:
    """Interact with ``env`` for ``n_steps`` one-step episodes, learning after each.

    ``env`` needs ``obs_dim``, ``horizon``, ``reset() -> obs`` and
    ``step(action) -> (reward, done)``.
    """
    if n_steps < config.batch_size:
        raise ValueError(f"steps ({n_steps}) below batch size ({config.batch_size})")
    if agent is None:
        agent = Agent(env.obs_dim, env.horizon, config)
    buffer = ReplayBuffer(config.buffer_capacity, env.obs_dim, env.horizon)
    history = TrainingLog()
    critic_loss = actor_obj = float("nan")
    window = max(1, config.log_every)
    for step in range(1, n_steps + 1):
        obs = env.reset()
        action = act_with_noise(agent, obs, agent.sigma)
        reward, _ = env.step(action)
        buffer.add(obs, action, reward)
        history.rewards.append(float(reward))
        agent.sigma *= config.sigma_decay
        if buffer.size >= config.batch_size:
            critic_loss, actor_obj = train_step(agent, buffer, config)
            if not agent.finite():
                raise FloatingPointError(f"non-finite network parameters after step {step}")
        if step % window == 0 or step == n_steps:
            recent = history.rewards[-window:]
            history.rows.append({"step": step, "mean_reward": float(np.mean(recent)),
                                 "critic_loss": critic_loss, "actor_objective": actor_obj,
                                 "sigma": float(agent.sigma)})
            log.debug("step %d mean reward %.4f critic loss %.3g", step, history.rows[-1]["mean_reward"],
                      critic_loss)
        if checkpoint_path is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            save_agent(agent, checkpoint_path, step)
    if checkpoint_path is not None:
        save_agent(agent, checkpoint_path, n_steps)
    return agent, history
