"""Baseline learners: DQN, A3C, and direct future prediction."""

from .common import (
    EpisodeStats,
    ReplayBuffer,
    Transition,
    boltzmann_policy,
    epsilon_schedule,
    nstep_returns,
    q_target,
    soft_update,
)
from .dqn import DQNAgent, DQNConfig, dqn_train_step, train_dqn
from .a3c import A3CAgent, A3CConfig, a3c_loss, train_a3c
from .dfp import DFPAgent, DFPConfig, dfp_act, dfp_targets, dfp_train_step, dfp_utilities, train_dfp
from .random_policy import RandomConfig, train_random
from .checkpoint import agent_networks, greedy_policy, load_agent, save_agent

TRAINERS = {"dqn": train_dqn, "a3c": train_a3c, "dfp": train_dfp, "random": train_random}
AGENT_CONFIGS = {"dqn": DQNConfig, "a3c": A3CConfig, "dfp": DFPConfig, "random": RandomConfig}

__all__ = [
    "EpisodeStats",
    "ReplayBuffer",
    "Transition",
    "boltzmann_policy",
    "epsilon_schedule",
    "nstep_returns",
    "q_target",
    "soft_update",
    "DQNAgent",
    "DQNConfig",
    "dqn_train_step",
    "train_dqn",
    "A3CAgent",
    "A3CConfig",
    "a3c_loss",
    "train_a3c",
    "DFPAgent",
    "DFPConfig",
    "dfp_act",
    "dfp_targets",
    "dfp_train_step",
    "dfp_utilities",
    "train_dfp",
    "agent_networks",
    "greedy_policy",
    "load_agent",
    "save_agent",
    "TRAINERS",
    "AGENT_CONFIGS",
]
