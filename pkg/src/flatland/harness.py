"""Experiment orchestration: multi-seed training, t-based confidence
intervals, append-only episode logs, and exact episode replays.

Per-seed episode logs are plain CSV (`episodes_seed<K>.csv`, header
``seed,episode,reward,fruits,poisons,step``) written incrementally so a run
can be inspected mid-flight.  Training is deterministic per seed, so a
finished output directory is a reproducible artifact: `run_or_load` reuses it
when the manifest matches the requested spec and retrains otherwise.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import AGENT_CONFIGS, TRAINERS, agent_networks, save_agent
from .config import EnvConfig, config_hash, config_to_json, parse_config
from .env import Environment

# Two-sided 95% Student-t critical values, df = 1..29; larger samples fall
# back to the normal quantile.
T_TABLE_95 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365,
    8: 2.306, 9: 2.262, 10: 2.228, 11: 2.201, 12: 2.179, 13: 2.160, 14: 2.145,
    15: 2.131, 16: 2.120, 17: 2.110, 18: 2.101, 19: 2.093, 20: 2.086,
    21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064, 25: 2.060, 26: 2.056,
    27: 2.052, 28: 2.048, 29: 2.045,
}
NORMAL_975 = 1.959964

LOG_HEADER = ["seed", "episode", "reward", "fruits", "poisons", "step"]
FINAL_WINDOW = 50
SMOOTHING_WINDOW = 10


@dataclass(frozen=True)
class RunSpec:
    env_config: EnvConfig
    algorithm: str
    seeds: tuple[int, ...]
    out_dir: Path
    total_steps: int = 250_000
    episodes: int = 500
    config_path: str | None = None

    def __post_init__(self):
        if self.algorithm not in TRAINERS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.seeds:
            raise ValueError("at least one seed required")
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


def default_seeds(base_seed: int = 0, count: int = 30) -> tuple[int, ...]:
    return tuple(range(base_seed, base_seed + count))


@dataclass(frozen=True)
class EpisodeLog:
    seed: int
    episode: int
    reward: float
    fruits: int
    poisons: int
    step: int


@dataclass
class RunSummary:
    algorithm: str
    config_hash: str
    total_steps: int
    seeds: tuple[int, ...]
    n_episodes: int
    mean_reward: list[float]
    ci_half_width: list[float]
    final_window: dict
    wall_clock_per_seed: dict[int, float]

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "config_hash": self.config_hash,
            "total_steps": self.total_steps,
            "seeds": list(self.seeds),
            "n_episodes": self.n_episodes,
            "mean_reward": self.mean_reward,
            "ci_half_width": self.ci_half_width,
            "final_window": self.final_window,
            "wall_clock_per_seed": {str(k): v for k, v in self.wall_clock_per_seed.items()},
        }


def aggregate_ci(samples) -> tuple[float, float]:
    """Mean and 95% t-interval half-width (sample std, n-1 denominator)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    mean = float(np.mean(arr))
    s = float(np.std(arr, ddof=1))
    df = arr.size - 1
    t_crit = T_TABLE_95.get(df, NORMAL_975)
    return mean, t_crit * s / math.sqrt(arr.size)


def moving_average(values, window: int) -> np.ndarray:
    """Trailing moving average; early entries average what is available."""
    arr = np.asarray(values, dtype=np.float64)
    out = np.empty_like(arr)
    csum = np.concatenate([[0.0], np.cumsum(arr)])
    for i in range(arr.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def seed_log_path(out_dir: Path, seed: int) -> Path:
    return Path(out_dir) / f"episodes_seed{seed}.csv"


def checkpoint_path(out_dir: Path, seed: int) -> Path:
    return Path(out_dir) / f"agent_seed{seed}.ckpt"


def train_one_seed(spec: RunSpec, seed: int) -> float:
    """Train a single seed, streaming its episode log; returns wall-clock seconds."""
    log_path = seed_log_path(spec.out_dir, seed)
    episode_counter = 0
    start = time.perf_counter()
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_HEADER)

        def on_episode(stats):
            nonlocal episode_counter
            writer.writerow(
                [seed, episode_counter, repr(stats.reward), stats.fruits, stats.poisons, stats.step]
            )
            fh.flush()
            episode_counter += 1

        trainer = TRAINERS[spec.algorithm]
        agent_cfg = AGENT_CONFIGS[spec.algorithm]()
        agent = trainer(spec.env_config, agent_cfg, seed, spec.total_steps, on_episode)
    elapsed = time.perf_counter() - start
    if agent is not None:
        save_agent(
            checkpoint_path(spec.out_dir, seed),
            spec.algorithm,
            config_hash(spec.env_config),
            spec.total_steps,
            agent_networks(agent),
        )
    return elapsed


def run_training(spec: RunSpec, progress=None) -> RunSummary:
    """Train every seed sequentially and write logs, checkpoints, and summary."""
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "algorithm": spec.algorithm,
        "config_hash": config_hash(spec.env_config),
        "config": config_to_json(spec.env_config),
        "total_steps": spec.total_steps,
        "seeds": list(spec.seeds),
    }
    (spec.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    wall_clock: dict[int, float] = {}
    for seed in spec.seeds:
        elapsed = train_one_seed(spec, seed)
        wall_clock[seed] = elapsed
        if progress is not None:
            progress(seed, elapsed)
    summary = summarize_run(spec.out_dir, wall_clock=wall_clock)
    write_summary(spec.out_dir, summary)
    return summary


def read_episode_logs(out_dir: Path) -> dict[int, list[EpisodeLog]]:
    logs: dict[int, list[EpisodeLog]] = {}
    for path in sorted(Path(out_dir).glob("episodes_seed*.csv")):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                entry = EpisodeLog(
                    seed=int(row["seed"]),
                    episode=int(row["episode"]),
                    reward=float(row["reward"]),
                    fruits=int(row["fruits"]),
                    poisons=int(row["poisons"]),
                    step=int(row["step"]),
                )
                logs.setdefault(entry.seed, []).append(entry)
    return logs


def summarize_run(out_dir: Path, wall_clock: dict[int, float] | None = None) -> RunSummary:
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    logs = read_episode_logs(out_dir)
    if not logs:
        raise FileNotFoundError(f"no episode logs under {out_dir}")
    seeds = tuple(sorted(logs))
    n_episodes = min(len(v) for v in logs.values())
    rewards = np.array(
        [[logs[s][e].reward for e in range(n_episodes)] for s in seeds]
    )  # (n_seeds, n_episodes)
    if len(seeds) >= 2:
        mean_ci = [aggregate_ci(rewards[:, e]) for e in range(n_episodes)]
        means = [m for m, _ in mean_ci]
        halves = [h for _, h in mean_ci]
    else:
        means = [float(x) for x in rewards[0]]
        halves = [0.0] * n_episodes
    final = {}
    window = min(FINAL_WINDOW, n_episodes)
    per_seed_final = {int(s): float(np.mean(rewards[i, -window:])) for i, s in enumerate(seeds)}
    final["window"] = window
    final["per_seed_mean"] = per_seed_final
    if len(seeds) >= 2:
        fmean, fhalf = aggregate_ci(list(per_seed_final.values()))
        final["mean"] = fmean
        final["ci_half_width"] = fhalf
    else:
        final["mean"] = next(iter(per_seed_final.values()))
        final["ci_half_width"] = 0.0
    return RunSummary(
        algorithm=manifest["algorithm"],
        config_hash=manifest["config_hash"],
        total_steps=manifest["total_steps"],
        seeds=seeds,
        n_episodes=n_episodes,
        mean_reward=[float(m) for m in means],
        ci_half_width=[float(h) for h in halves],
        final_window=final,
        wall_clock_per_seed=wall_clock or {},
    )


def write_summary(out_dir: Path, summary: RunSummary) -> None:
    out_dir = Path(out_dir)
    (out_dir / "summary.json").write_text(json.dumps(summary.to_json(), indent=2) + "\n")
    smoothed = moving_average(summary.mean_reward, SMOOTHING_WINDOW)
    with open(out_dir / "curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_reward", "ci_half_width", "smoothed_mean_reward"])
        for e in range(summary.n_episodes):
            writer.writerow(
                [e, repr(summary.mean_reward[e]), repr(summary.ci_half_width[e]), repr(float(smoothed[e]))]
            )


def run_is_complete(spec: RunSpec) -> bool:
    """True when out_dir holds finished logs for exactly this spec."""
    manifest_path = spec.out_dir / "manifest.json"
    if not manifest_path.exists():
        return False
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError:
        return False
    if manifest.get("config_hash") != config_hash(spec.env_config):
        return False
    if manifest.get("total_steps") != spec.total_steps:
        return False
    if manifest.get("algorithm") != spec.algorithm:
        return False
    if tuple(manifest.get("seeds", ())) != spec.seeds:
        return False
    expected = spec.total_steps // spec.env_config.episode_length
    for seed in spec.seeds:
        path = seed_log_path(spec.out_dir, seed)
        if not path.exists():
            return False
        with open(path, newline="") as fh:
            rows = sum(1 for _ in fh) - 1
        if rows < expected:
            return False
    return True


def run_or_load(spec: RunSpec, progress=None) -> tuple[RunSummary, bool]:
    """Reuse a finished deterministic run if present; train otherwise.

    Returns (summary, trained).  Reuse is keyed on the manifest (algorithm,
    config hash, seeds, steps) plus complete per-seed logs.
    """
    if run_is_complete(spec):
        summary = summarize_run(spec.out_dir)
        write_summary(spec.out_dir, summary)
        return summary, False
    return run_training(spec, progress=progress), True


# ---------------------------------------------------------------------------
# Replay files: enough to re-simulate one episode exactly.

REPLAY_VERSION = 1


class ReplayError(RuntimeError):
    pass


def record_replay(path, env_config: EnvConfig, seed: int, actions, rewards) -> None:
    payload = {
        "version": REPLAY_VERSION,
        "config_hash": config_hash(env_config),
        "config": config_to_json(env_config),
        "seed": int(seed),
        "actions": [a if isinstance(a, int) else [float(a[0]), float(a[1])] for a in actions],
        "rewards": [float(r) for r in rewards],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_replay(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ReplayError(f"unreadable replay file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("version") != REPLAY_VERSION:
        raise ReplayError(
            f"replay version mismatch: expected {REPLAY_VERSION}, got {payload.get('version')!r}"
        )
    for key in ("config", "config_hash", "seed", "actions", "rewards"):
        if key not in payload:
            raise ReplayError(f"replay file missing field {key!r}")
    cfg = parse_config(json.dumps(payload["config"]))
    if config_hash(cfg) != payload["config_hash"]:
        raise ReplayError("replay config hash does not match embedded config")
    payload["config"] = cfg
    return payload


def replay_episode(payload: dict) -> tuple[list[np.ndarray], list[float]]:
    """Re-simulate a loaded replay; returns (observations, rewards)."""
    env = Environment(payload["config"])
    observations = [env.reset(payload["seed"])]
    rewards: list[float] = []
    for action in payload["actions"]:
        act = action if isinstance(action, int) else (action[0], action[1])
        result = env.step(act)
        observations.append(result.observation)
        rewards.append(result.reward)
    return observations, rewards


def record_episode(env_config: EnvConfig, seed: int, policy, path=None):
    """Roll out one full episode under `policy` and optionally write a replay.

    Returns (actions, rewards, total_reward).
    """
    env = Environment(env_config)
    obs = env.reset(seed)
    actions = []
    rewards = []
    while not env.done:
        action = policy(obs)
        result = env.step(action)
        actions.append(action)
        rewards.append(result.reward)
        obs = result.observation
    if path is not None:
        record_replay(path, env_config, seed, actions, rewards)
    return actions, rewards, float(sum(rewards))
