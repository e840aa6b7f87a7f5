"""Uniform-random baseline: no learning, same logging surface as the learners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import EnvConfig
from ..env import Environment
from .common import EpisodeStats, episode_seed


@dataclass(frozen=True)
class RandomConfig:
    pass


def train_random(
    env_cfg: EnvConfig,
    cfg: RandomConfig,
    seed: int,
    total_steps: int,
    on_episode=None,
):
    env = Environment(env_cfg)
    act_ss, ep_ss = np.random.SeedSequence(seed).spawn(2)
    act_rng = np.random.default_rng(act_ss)
    ep_rng = np.random.default_rng(ep_ss)
    global_step = 0
    episode = 0
    while global_step < total_steps:
        env.reset(episode_seed(ep_rng))
        ep_reward = 0.0
        while not env.done and global_step < total_steps:
            ep_reward += env.step(int(act_rng.integers(3))).reward
            global_step += 1
        if env.done and on_episode is not None:
            on_episode(
                EpisodeStats(
                    episode=episode,
                    reward=ep_reward,
                    fruits=env.state.fruits_picked,
                    poisons=env.state.poisons_picked,
                    step=global_step,
                )
            )
        episode += 1
    return None
