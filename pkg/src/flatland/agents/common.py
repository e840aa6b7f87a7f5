"""Shared learner primitives: transitions, replay, policies, update rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Network, softmax


@dataclass
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool
    measurements: np.ndarray | None = None


@dataclass
class EpisodeStats:
    """Bookkeeping emitted by the trainers when an episode completes."""

    episode: int
    reward: float
    fruits: int
    poisons: int
    step: int  # global step count at episode end


class ReplayBuffer:
    """Fixed-capacity ring of transitions with strictly FIFO eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._data: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, tr: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(tr)
        else:
            self._data[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def get(self, idx: int) -> Transition:
        if len(self._data) < self.capacity:
            return self._data[idx]
        # Oldest entry sits at the write cursor once the ring is full.
        return self._data[(self._next + idx) % self.capacity]

    def sample_indices(self, rng: np.random.Generator, batch_size: int) -> np.ndarray:
        if not self._data:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, len(self._data), size=batch_size)


def boltzmann_policy(q_values: np.ndarray, temperature: float) -> np.ndarray:
    """Action probabilities proportional to exp(q / temperature)."""
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    return softmax(np.asarray(q_values, dtype=np.float64) / temperature)


def q_target(reward: float, next_q: np.ndarray, gamma: float, done: bool) -> float:
    """One-step bootstrapped target; terminal transitions use the bare reward."""
    if done:
        return float(reward)
    return float(reward + gamma * np.max(next_q))


def soft_update(target: Network, online: Network, tau: float) -> None:
    """Exponential tracking, in place: target <- (1 - tau) * target + tau * online."""
    for t_params, o_params in zip(target.params, online.params):
        for key, t in t_params.items():
            # Evaluate the right-hand side first: target and online may alias.
            np.copyto(t, (1.0 - tau) * t + tau * o_params[key])


def nstep_returns(rewards, bootstrap_value: float, gamma: float) -> np.ndarray:
    """Discounted returns R_i = r_i + gamma * R_{i+1}, seeded by the bootstrap.

    The bootstrap must be 0 when the segment ended in a terminal state.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("rewards must be non-empty")
    out = np.empty_like(rewards)
    acc = float(bootstrap_value)
    for i in range(rewards.size - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def epsilon_schedule(
    t: int,
    initial: float = 1.0,
    final: float = 0.0001,
    anneal_steps: int = 300_000,
) -> float:
    """Linear interpolation from `initial` at t=0 to `final` at `anneal_steps`,
    clamped afterwards."""
    if t < 0:
        raise ValueError("t must be >= 0")
    frac = min(t, anneal_steps) / anneal_steps
    return initial + (final - initial) * frac


def episode_seed(rng: np.random.Generator) -> int:
    """Fresh 63-bit environment seed from a trainer's dedicated stream."""
    return int(rng.integers(0, 2**63))


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept either raw entropy or an already-spawned SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)
