"""Learning-curve reports: summary JSON, a plottable CSV, and a rendered figure.

The figure shows the across-seed mean reward per episode with its 95%
confidence band, plus a 10-episode moving average for readability.  Raw logs
are never modified; smoothing is presentation only.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .harness import SMOOTHING_WINDOW, RunSummary, moving_average, summarize_run, write_summary


def render_learning_curve(summary: RunSummary, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    episodes = np.arange(summary.n_episodes)
    mean = np.asarray(summary.mean_reward)
    half = np.asarray(summary.ci_half_width)
    smoothed = moving_average(mean, SMOOTHING_WINDOW)

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.fill_between(episodes, mean - half, mean + half, alpha=0.25, linewidth=0, label="95% CI")
    ax.plot(episodes, mean, linewidth=0.8, alpha=0.5, label="mean reward")
    ax.plot(episodes, smoothed, linewidth=1.8, label=f"{SMOOTHING_WINDOW}-episode average")
    ax.set_xlabel("episode")
    ax.set_ylabel("episode reward")
    ax.set_title(f"{summary.algorithm.upper()} - {len(summary.seeds)} seeds")
    ax.legend(loc="upper left", frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def summarize_to(in_dir: Path, out_dir: Path | None = None) -> tuple[RunSummary, list[Path]]:
    """Aggregate a run directory: summary.json + curve.csv + learning_curve.png."""
    in_dir = Path(in_dir)
    out_dir = in_dir if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize_run(in_dir)
    write_summary(out_dir, summary)
    figure = render_learning_curve(summary, out_dir / "learning_curve.png")
    return summary, [out_dir / "summary.json", out_dir / "curve.csv", figure]
