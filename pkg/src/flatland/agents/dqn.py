"""Deep Q-learning with uniform experience replay, a softly-tracked target
network, and a temperature-1 Boltzmann behaviour policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..env import Environment
from ..config import EnvConfig
from .common import (
    EpisodeStats,
    ReplayBuffer,
    Transition,
    boltzmann_policy,
    episode_seed,
    soft_update,
)


@dataclass(frozen=True)
class DQNConfig:
    gamma: float = 0.99
    lr: float = 0.001
    temperature: float = 1.0
    warmup: int = 1500
    tau: float = 0.01
    capacity: int = 500_000
    batch_size: int = 32
    train_interval: int = 1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")


class DQNAgent:
    def __init__(
        self,
        cfg: DQNConfig,
        obs_shape: tuple[int, int],
        n_actions: int,
        seed: int,
    ):
        self.cfg = cfg
        self.n_actions = n_actions
        init_ss, act_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
        self.online = nn.build_arch(nn.DQN, n_actions, obs_shape, np.random.default_rng(init_ss))
        self.target = self.online.clone()
        self.adam = nn.AdamState.for_params(self.online.trunk.params, lr=cfg.lr)
        self.buffer = ReplayBuffer(cfg.capacity)
        self.act_rng = np.random.default_rng(act_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        self.steps_observed = 0

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        q, _ = nn.forward(self.online.trunk, obs)
        return q

    def act(self, obs: np.ndarray) -> int:
        probs = boltzmann_policy(self.q_values(obs), self.cfg.temperature)
        return int(self.act_rng.choice(self.n_actions, p=probs))

    def greedy_action(self, obs: np.ndarray) -> int:
        return int(np.argmax(self.q_values(obs)))

    def observe(self, tr: Transition) -> None:
        self.buffer.push(tr)
        self.steps_observed += 1

    def train(self) -> float | None:
        return dqn_train_step(self)


def dqn_train_step(agent: DQNAgent, rng: np.random.Generator | None = None) -> float | None:
    """One replayed Q-regression step; a no-op during warmup.

    Samples uniformly with replacement, regresses Q(s, a) toward the target
    r + gamma * max_a' Q_target(s', a') (bare r on terminal transitions) under
    mean squared error, applies one Adam update, then softly tracks the target
    network.  Returns the batch loss, or None when no update happened.
    """
    cfg = agent.cfg
    if agent.steps_observed < cfg.warmup:
        return None
    if agent.steps_observed % cfg.train_interval != 0:
        return None
    rng = agent.sample_rng if rng is None else rng
    idx = agent.buffer.sample_indices(rng, cfg.batch_size)
    batch = [agent.buffer.get(int(i)) for i in idx]
    obs = np.stack([t.observation for t in batch])
    next_obs = np.stack([t.next_observation for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    not_done = np.array([0.0 if t.done else 1.0 for t in batch], dtype=np.float64)

    next_q, _ = nn.forward(agent.target.trunk, next_obs)
    targets = rewards + cfg.gamma * next_q.max(axis=1) * not_done

    q, cache = nn.forward(agent.online.trunk, obs)
    err = q[np.arange(len(batch)), actions] - targets
    loss = float(np.mean(err**2))
    dq = np.zeros_like(q)
    dq[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
    grads, _ = nn.backward(agent.online.trunk, cache, dq)
    nn.adam_step(agent.online.trunk.params, grads, agent.adam)
    soft_update(agent.target.trunk, agent.online.trunk, cfg.tau)
    return loss


def train_dqn(
    env_cfg: EnvConfig,
    cfg: DQNConfig,
    seed: int,
    total_steps: int,
    on_episode=None,
) -> DQNAgent:
    """Train for `total_steps` environment steps, resetting every episode.

    `on_episode` receives an EpisodeStats after each completed episode.
    """
    env = Environment(env_cfg)
    agent = DQNAgent(cfg, (env_cfg.sensor.n_rays, 3), env.n_actions, seed)
    ep_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    global_step = 0
    episode = 0
    while global_step < total_steps:
        obs = env.reset(episode_seed(ep_rng))
        ep_reward = 0.0
        while not env.done and global_step < total_steps:
            action = agent.act(obs)
            result = env.step(action)
            agent.observe(Transition(obs, action, result.reward, result.observation, result.done))
            agent.train()
            obs = result.observation
            ep_reward += result.reward
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
    return agent
