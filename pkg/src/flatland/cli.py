"""Command line entry points: train, eval, replay, serve, summarize."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agents import greedy_policy, load_agent
from .config import default_benchmark_config, load_config
from .env import Environment
from .harness import (
    RunSpec,
    default_seeds,
    load_replay,
    record_episode,
    replay_episode,
    run_training,
)
from .report import summarize_to
from .server import DEFAULT_PORT, SessionServer


def _env_config(path: str | None):
    if path is None:
        return default_benchmark_config()
    return load_config(path)


def _cmd_train(args) -> int:
    cfg = _env_config(args.config)
    spec = RunSpec(
        env_config=cfg,
        algorithm=args.algo,
        seeds=default_seeds(args.base_seed, args.seeds),
        out_dir=Path(args.out),
        total_steps=args.total_steps,
        episodes=args.total_steps // cfg.episode_length,
        config_path=args.config,
    )

    def progress(seed, elapsed):
        print(f"seed {seed}: finished {args.total_steps} steps in {elapsed:.1f}s", flush=True)

    summary = run_training(spec, progress=progress)
    final = summary.final_window
    print(
        f"{args.algo}: {len(spec.seeds)} seeds, final-{final['window']}-episode mean "
        f"{final['mean']:.1f} (CI half-width {final['ci_half_width']:.1f})"
    )
    print(f"logs and summary written to {spec.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    header, networks = load_agent(args.checkpoint)
    cfg = _env_config(args.config)
    policy = greedy_policy(header, networks)
    rewards = []
    for i in range(args.episodes):
        seed = args.base_seed + i
        replay_path = None
        if args.replay_dir:
            Path(args.replay_dir).mkdir(parents=True, exist_ok=True)
            replay_path = Path(args.replay_dir) / f"episode_seed{seed}.replay.json"
        _, _, total = record_episode(cfg, seed, policy, path=replay_path)
        rewards.append(total)
        print(f"episode {i} (seed {seed}): reward {total:.1f}")
    print(f"mean reward over {args.episodes} episodes: {float(np.mean(rewards)):.2f}")
    return 0


def _cmd_replay(args) -> int:
    payload = load_replay(args.file)
    observations, rewards = replay_episode(payload)
    recorded = payload["rewards"]
    if len(rewards) != len(recorded) or any(a != b for a, b in zip(rewards, recorded)):
        print("MISMATCH: re-simulated rewards differ from the recorded episode", file=sys.stderr)
        return 1
    print(
        f"replayed {len(rewards)} steps, seed {payload['seed']}, "
        f"total reward {sum(rewards):.1f} (exact match)"
    )
    return 0


def _cmd_serve(args) -> int:
    cfg = _env_config(args.config)
    server = SessionServer(cfg, host=args.host, port=args.port, static_dir=args.static)
    print(f"session server listening on {args.host}:{server.port} (TCP NDJSON + WebSocket /ws)")
    if args.static:
        print(f"serving static files from {args.static}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.close()
    return 0


def _cmd_summarize(args) -> int:
    summary, paths = summarize_to(Path(args.in_dir), Path(args.out) if args.out else None)
    final = summary.final_window
    print(
        f"{summary.algorithm}: {len(summary.seeds)} seeds x {summary.n_episodes} episodes, "
        f"final-{final['window']}-episode mean {final['mean']:.1f} "
        f"(CI half-width {final['ci_half_width']:.1f})"
    )
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatland",
        description="First-person 2-D navigation arena with DQN/A3C/DFP baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one algorithm over several seeds")
    p_train.add_argument("--algo", choices=["dqn", "a3c", "dfp", "random"], required=True)
    p_train.add_argument("--config", help="environment config JSON (default: built-in benchmark)")
    p_train.add_argument("--seeds", type=int, default=30, help="number of consecutive seeds")
    p_train.add_argument("--base-seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="output directory for logs/checkpoints")
    p_train.add_argument("--total-steps", type=int, default=250_000)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="greedy-evaluate a trained checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--config", help="environment config JSON (default: built-in benchmark)")
    p_eval.add_argument("--base-seed", type=int, default=10_000)
    p_eval.add_argument("--replay-dir", help="also record replay files here")
    p_eval.set_defaults(func=_cmd_eval)

    p_replay = sub.add_parser("replay", help="re-simulate a recorded episode and verify it")
    p_replay.add_argument("--file", required=True)
    p_replay.set_defaults(func=_cmd_replay)

    p_serve = sub.add_parser("serve", help="run the session server")
    p_serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--config", help="environment config JSON (default: built-in benchmark)")
    p_serve.add_argument("--static", help="serve this directory over HTTP (play client)")
    p_serve.set_defaults(func=_cmd_serve)

    p_sum = sub.add_parser("summarize", help="aggregate a run directory into summary + curve + figure")
    p_sum.add_argument("--in", dest="in_dir", required=True)
    p_sum.add_argument("--out", help="write outputs here instead of the run directory")
    p_sum.set_defaults(func=_cmd_summarize)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
