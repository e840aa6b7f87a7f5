"""Advantage actor-critic with several actor-learner workers on private
environments, n-step returns, and entropy regularization.

Workers share one parameter set and one Adam state.  Updates are serialized:
each worker in turn syncs its local copy, rolls out up to t_max actions,
computes gradients locally, and applies them to the shared parameters before
the next worker runs.  The rotation order is fixed, which keeps whole training
runs reproducible from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..config import EnvConfig
from ..env import Environment
from .common import EpisodeStats, episode_seed, nstep_returns, seed_sequence


@dataclass(frozen=True)
class A3CConfig:
    gamma: float = 0.99
    lr: float = 1e-5
    n_workers: int = 5
    t_max: int = 20
    update_interval: int = 20
    entropy_beta: float = 0.01
    action_repeat: int = 1

    def __post_init__(self):
        if self.t_max < 1 or self.n_workers < 1:
            raise ValueError("t_max and n_workers must be >= 1")


def a3c_loss(
    policy: np.ndarray, value: float, action: int, return_: float, beta: float
) -> tuple[float, np.ndarray, float]:
    """Single-step actor-critic loss and its gradients.

    loss = -log pi(a) * (R - V) + (R - V)^2 / 2 - beta * H(pi), with the
    advantage treated as a constant in the policy term.  Returns (loss,
    d loss / d policy, d loss / d value).
    """
    policy = np.asarray(policy, dtype=np.float64)
    adv = return_ - value
    log_policy = np.log(np.maximum(policy, 1e-300))
    entropy = -float(np.sum(policy * log_policy))
    loss = -float(log_policy[action]) * adv + 0.5 * adv**2 - beta * entropy
    dpolicy = beta * (log_policy + 1.0)
    dpolicy[action] -= adv / policy[action]
    dvalue = value - return_
    return float(loss), dpolicy, float(dvalue)


class A3CWorker:
    def __init__(self, wid: int, env_cfg: EnvConfig, arch: nn.Arch, seed):
        self.wid = wid
        self.env = Environment(env_cfg)
        self.local = arch.clone()
        act_ss, ep_ss = seed_sequence(seed).spawn(2)
        self.act_rng = np.random.default_rng(act_ss)
        self.ep_rng = np.random.default_rng(ep_ss)
        self.obs: np.ndarray | None = None
        self.episode_reward = 0.0
        self.episodes_done = 0

    def sync(self, shared: nn.Arch) -> None:
        for mine, theirs in zip(self.local.parameters(), shared.parameters()):
            for key in mine:
                np.copyto(mine[key], theirs[key])

    def policy_value(self, obs: np.ndarray) -> tuple[np.ndarray, float]:
        h, _ = nn.forward(self.local.trunk, obs)
        p, _ = nn.forward(self.local.heads["policy"], h)
        v, _ = nn.forward(self.local.heads["value"], h)
        return p, float(v[0])


class A3CAgent:
    """Owns the shared parameters and the deterministic worker rotation."""

    def __init__(self, cfg: A3CConfig, env_cfg: EnvConfig, n_actions: int, seed: int):
        self.cfg = cfg
        self.n_actions = n_actions
        seeds = np.random.SeedSequence(seed).spawn(cfg.n_workers + 1)
        self.shared = nn.build_arch(
            nn.A3C, n_actions, (env_cfg.sensor.n_rays, 3), np.random.default_rng(seeds[0])
        )
        self.adam = nn.AdamState.for_params(self.shared.parameters(), lr=cfg.lr)
        self.workers = [
            A3CWorker(w, env_cfg, self.shared, seeds[w + 1]) for w in range(cfg.n_workers)
        ]
        self.global_step = 0

    def greedy_action(self, obs: np.ndarray) -> int:
        h, _ = nn.forward(self.shared.trunk, obs)
        p, _ = nn.forward(self.shared.heads["policy"], h)
        return int(np.argmax(p))

    def run_segment(self, worker: A3CWorker, max_steps: int, on_episode=None) -> int:
        """One worker turn: sync, roll out, apply gradients to shared params."""
        cfg = self.cfg
        worker.sync(self.shared)
        if worker.obs is None or worker.env.done:
            worker.obs = worker.env.reset(episode_seed(worker.ep_rng))
            worker.episode_reward = 0.0

        observations: list[np.ndarray] = []
        actions: list[int] = []
        rewards: list[float] = []
        steps = 0
        while steps < min(cfg.t_max, max_steps) and not worker.env.done:
            probs = worker.policy_value(worker.obs)[0]
            action = int(worker.act_rng.choice(self.n_actions, p=probs))
            result = worker.env.step(action)
            observations.append(worker.obs)
            actions.append(action)
            rewards.append(result.reward)
            worker.obs = result.observation
            worker.episode_reward += result.reward
            steps += 1
        if steps == 0:
            return 0
        self.global_step += steps

        if worker.env.done:
            bootstrap = 0.0
            state = worker.env.state
            if on_episode is not None:
                on_episode(
                    worker.wid,
                    EpisodeStats(
                        episode=worker.episodes_done,
                        reward=worker.episode_reward,
                        fruits=state.fruits_picked,
                        poisons=state.poisons_picked,
                        step=self.global_step,
                    ),
                )
            worker.episodes_done += 1
        else:
            _, bootstrap = worker.policy_value(worker.obs)

        returns = nstep_returns(rewards, bootstrap, cfg.gamma)
        batch = np.stack(observations)
        h, trunk_cache = nn.forward(worker.local.trunk, batch)
        policy_net = worker.local.heads["policy"]
        value_net = worker.local.heads["value"]
        probs, policy_cache = nn.forward(policy_net, h)
        values, value_cache = nn.forward(value_net, h)
        values = values[:, 0]
        adv = returns - values  # treated as constant in the policy term

        rows = np.arange(steps)
        log_probs = np.log(np.maximum(probs, 1e-300))
        dpolicy = cfg.entropy_beta * (log_probs + 1.0)
        dpolicy[rows, actions] -= adv / probs[rows, actions]
        dvalue = (values - returns)[:, None]

        policy_grads, dh_policy = nn.backward(policy_net, policy_cache, dpolicy)
        value_grads, dh_value = nn.backward(value_net, value_cache, dvalue)
        trunk_grads, _ = nn.backward(worker.local.trunk, trunk_cache, dh_policy + dh_value)

        # Same ordering as Arch.parameters(): trunk, then heads sorted by name.
        grads = trunk_grads + policy_grads + value_grads
        nn.adam_step(self.shared.parameters(), grads, self.adam)
        return steps


def train_a3c(
    env_cfg: EnvConfig,
    cfg: A3CConfig,
    seed: int,
    total_steps: int,
    on_episode=None,
) -> A3CAgent:
    """Round-robin the workers until the summed step budget is spent."""
    agent = A3CAgent(cfg, env_cfg, n_actions=3, seed=seed)

    def forward_episode(_wid: int, stats: EpisodeStats) -> None:
        if on_episode is not None:
            on_episode(stats)

    idx = 0
    while agent.global_step < total_steps:
        worker = agent.workers[idx % cfg.n_workers]
        agent.run_segment(worker, total_steps - agent.global_step, forward_episode)
        idx += 1
    return agent
