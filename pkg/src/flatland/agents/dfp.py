"""Learning to act by predicting future measurements.

The network maps an observation to, per action, the change in the measurement
vector (score, fruits picked, poisons picked) at several future offsets.
Acting is epsilon-greedy over the goal-weighted sum of those predictions;
training regresses the taken action's predictions toward the realised deltas,
so whole episodes are kept in replay to look up future measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..config import EnvConfig
from ..env import Environment
from .common import EpisodeStats, episode_seed, epsilon_schedule


@dataclass(frozen=True)
class DFPConfig:
    gamma: float = 0.99  # listed alongside the other hyperparameters; the
    # supervised objective itself is undiscounted
    lr: float = 1e-5
    goal: tuple[float, float, float] = (1.0, 1.0, -1.0)
    offsets: tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    warmup: int = 1000
    train_interval: int = 3
    capacity: int = 20_000
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.0001
    anneal_steps: int = 300_000
    measurement_scale: tuple[float, float, float] = (0.01, 0.1, 0.1)
    batch_size: int = 32

    def __post_init__(self):
        if any(o <= 0 for o in self.offsets) or list(self.offsets) != sorted(set(self.offsets)):
            raise ValueError("offsets must be strictly increasing positives")
        if not (0.0 <= self.epsilon_final <= self.epsilon_initial <= 1.0):
            raise ValueError("epsilon bounds must satisfy 0 <= final <= initial <= 1")


def dfp_targets(
    measurements: np.ndarray,
    t: int,
    offsets: tuple[int, ...],
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> tuple[np.ndarray, np.ndarray]:
    """Per-offset normalized measurement deltas from step t, plus a validity mask.

    `measurements` holds the stream m_0 .. m_T (reset state included), so row
    j is (m_{t+tau_j} - m_t) * scale and rows reaching past the episode end
    are masked out.
    """
    measurements = np.asarray(measurements, dtype=np.float64)
    last = measurements.shape[0] - 1
    if not 0 <= t <= last:
        raise ValueError(f"step index {t} outside episode of length {last}")
    scale_arr = np.asarray(scale, dtype=np.float64)
    targets = np.zeros((len(offsets), measurements.shape[1]), dtype=np.float64)
    mask = np.zeros(len(offsets), dtype=bool)
    for j, tau in enumerate(offsets):
        if t + tau <= last:
            targets[j] = (measurements[t + tau] - measurements[t]) * scale_arr
            mask[j] = True
    return targets, mask


def dfp_utilities(predictions: np.ndarray, goal) -> np.ndarray:
    """Goal-weighted sum of predicted deltas, uniformly over offsets: u(a)."""
    preds = np.asarray(predictions, dtype=np.float64)
    goal_arr = np.asarray(goal, dtype=np.float64)
    return np.einsum("ajk,k->a", preds, goal_arr)


def dfp_act(
    predictions: np.ndarray, goal, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over goal utility; ties break toward the lowest index."""
    n_actions = predictions.shape[0]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(dfp_utilities(predictions, goal)))


class EpisodeMemory:
    """Completed episodes kept whole so future measurements stay addressable.

    Capacity counts transitions; eviction drops whole episodes oldest-first.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.episodes: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.total = 0

    def push(self, observations: np.ndarray, actions: np.ndarray, measurements: np.ndarray) -> None:
        self.episodes.append((observations, actions, measurements))
        self.total += len(actions)
        while self.total > self.capacity and len(self.episodes) > 1:
            dropped = self.episodes.pop(0)
            self.total -= len(dropped[1])

    def locate(self, flat_index: int) -> tuple[int, int]:
        for ep, (_, actions, _) in enumerate(self.episodes):
            if flat_index < len(actions):
                return ep, flat_index
            flat_index -= len(actions)
        raise IndexError(flat_index)


class DFPAgent:
    def __init__(self, cfg: DFPConfig, obs_shape: tuple[int, int], n_actions: int, seed: int):
        self.cfg = cfg
        self.n_actions = n_actions
        init_ss, act_ss, sample_ss = np.random.SeedSequence(seed).spawn(3)
        self.arch = nn.build_arch(
            nn.DFP,
            n_actions,
            obs_shape,
            np.random.default_rng(init_ss),
            n_offsets=len(cfg.offsets),
            n_measurements=3,
        )
        self.adam = nn.AdamState.for_params(self.arch.parameters(), lr=cfg.lr)
        self.memory = EpisodeMemory(cfg.capacity)
        self.act_rng = np.random.default_rng(act_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        self.steps_observed = 0
        self._ep_obs: list[np.ndarray] = []
        self._ep_actions: list[int] = []
        self._ep_meas: list[np.ndarray] = []

    def predictions(self, obs) -> np.ndarray:
        """(n_actions, n_offsets, 3) predicted measurement deltas."""
        h, _ = nn.forward(self.arch.trunk, obs)
        single = h.ndim == 1
        rows = []
        for a in range(self.n_actions):
            out, _ = nn.forward(self.arch.heads[f"action_{a}"], h)
            rows.append(out.reshape((len(self.cfg.offsets), 3) if single else (-1, len(self.cfg.offsets), 3)))
        return np.stack(rows, axis=0)

    def epsilon(self) -> float:
        return epsilon_schedule(
            self.steps_observed,
            self.cfg.epsilon_initial,
            self.cfg.epsilon_final,
            self.cfg.anneal_steps,
        )

    def act(self, obs: np.ndarray) -> int:
        if self.act_rng.random() < self.epsilon():
            return int(self.act_rng.integers(self.n_actions))
        return int(np.argmax(dfp_utilities(self.predictions(obs), self.cfg.goal)))

    def greedy_action(self, obs: np.ndarray) -> int:
        return int(np.argmax(dfp_utilities(self.predictions(obs), self.cfg.goal)))

    def begin_episode(self, obs: np.ndarray, measurements: np.ndarray) -> None:
        self._ep_obs = [obs]
        self._ep_actions = []
        self._ep_meas = [measurements]

    def observe(self, action: int, obs: np.ndarray, measurements: np.ndarray, done: bool) -> None:
        self._ep_actions.append(action)
        self._ep_meas.append(measurements)
        if not done:
            self._ep_obs.append(obs)
        self.steps_observed += 1
        if done:
            self.memory.push(
                np.stack(self._ep_obs),
                np.array(self._ep_actions, dtype=np.intp),
                np.stack(self._ep_meas),
            )

    def train(self) -> float | None:
        return dfp_train_step(self)


def dfp_train_step(agent: DFPAgent, rng: np.random.Generator | None = None) -> float | None:
    """Regress the taken action's predictions toward realised deltas.

    Runs every `train_interval` observed steps once warmup has passed and at
    least one episode is stored; the loss is the mean squared error over valid
    (offset, measurement) entries.
    """
    cfg = agent.cfg
    if agent.steps_observed < cfg.warmup or agent.memory.total == 0:
        return None
    if agent.steps_observed % cfg.train_interval != 0:
        return None
    rng = agent.sample_rng if rng is None else rng
    flat = rng.integers(0, agent.memory.total, size=cfg.batch_size)
    obs_batch = []
    actions = []
    targets = []
    masks = []
    for f in flat:
        ep, t = agent.memory.locate(int(f))
        observations, ep_actions, measurements = agent.memory.episodes[ep]
        obs_batch.append(observations[t])
        actions.append(int(ep_actions[t]))
        tgt, mask = dfp_targets(measurements, t, cfg.offsets, cfg.measurement_scale)
        targets.append(tgt)
        masks.append(mask)
    obs_arr = np.stack(obs_batch)
    target_arr = np.stack(targets)  # (B, J, 3)
    mask_arr = np.stack(masks)  # (B, J)
    action_arr = np.array(actions, dtype=np.intp)

    h, trunk_cache = nn.forward(agent.arch.trunk, obs_arr)
    n_valid = max(1, int(mask_arr.sum()) * 3)
    dh_total = np.zeros_like(h)
    loss = 0.0
    head_grads: dict[str, list] = {}
    for a in range(agent.n_actions):
        head = agent.arch.heads[f"action_{a}"]
        out, cache = nn.forward(head, h)
        preds = out.reshape(-1, len(cfg.offsets), 3)
        sel = action_arr == a
        diff = np.where(
            (sel[:, None] & mask_arr)[:, :, None], preds - target_arr, 0.0
        )
        loss += float(np.sum(diff**2))
        dout = (2.0 * diff / n_valid).reshape(out.shape)
        grads, dh = nn.backward(head, cache, dout)
        head_grads[f"action_{a}"] = grads
        dh_total += dh
    trunk_grads, _ = nn.backward(agent.arch.trunk, trunk_cache, dh_total)

    grads = list(trunk_grads)
    for name in sorted(agent.arch.heads):
        grads.extend(head_grads[name])
    nn.adam_step(agent.arch.parameters(), grads, agent.adam)
    return loss / n_valid


def train_dfp(
    env_cfg: EnvConfig,
    cfg: DFPConfig,
    seed: int,
    total_steps: int,
    on_episode=None,
) -> DFPAgent:
    env = Environment(env_cfg)
    agent = DFPAgent(cfg, (env_cfg.sensor.n_rays, 3), env.n_actions, seed)
    ep_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    global_step = 0
    episode = 0
    while global_step < total_steps:
        obs = env.reset(episode_seed(ep_rng))
        agent.begin_episode(obs, env.measurements())
        ep_reward = 0.0
        while not env.done and global_step < total_steps:
            action = agent.act(obs)
            result = env.step(action)
            agent.observe(action, result.observation, result.measurements, result.done)
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
