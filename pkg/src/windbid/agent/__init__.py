from windbid.agent.ddpg import (Agent, AgentConfig, ReplayBuffer, TrainingLog, act_with_noise,
                                actor_forward, critic_forward, load_agent, save_agent, train,
                                train_step)
from windbid.agent.nn import Adam, Mlp, backprop_grads, soft_update

__all__ = [
    "Adam", "Agent", "AgentConfig", "Mlp", "ReplayBuffer", "TrainingLog", "act_with_noise",
    "actor_forward", "backprop_grads", "critic_forward", "load_agent", "save_agent",
    "soft_update", "train", "train_step",
]
