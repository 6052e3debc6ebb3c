"""Static benchmark figures (Agg backend, no timestamps, byte-stable)."""

from __future__ import annotations

from pathlib import Path
from typing import Dict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_META)
    plt.close(fig)
    return path


def latency_histogram(latencies, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if latencies:
        ax.hist(latencies, bins=min(40, max(5, len(set(latencies)))), color="#4c72b0")
    ax.set_xlabel("submit to commit latency (sim ms)")
    ax.set_ylabel("transactions")
    ax.set_title("Commit latency")
    return _save(fig, path)


def tps_timeline(buckets, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(range(len(buckets)), buckets, where="post", color="#55a868")
    ax.set_xlabel("simulated second")
    ax.set_ylabel("committed txs")
    ax.set_title("Throughput")
    return _save(fig, path)


def availability_bar(avail: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(["fault-free", "under fault"], [avail["baseline_commits"], avail["fault_commits"]],
           color=["#4c72b0", "#c44e52"])
    w = avail["window"]
    ax.set_title(f"Commits in fault window [{w[0]}, {w[1]}) ms\nratio {avail['ratio']:.3f}")
    ax.set_ylabel("committed txs")
    return _save(fig, path)


def render_all(series: dict, out_dir: Path) -> Dict[str, Path]:
    d = Path(out_dir)
    return {
        "latency_png": latency_histogram(series["latencies_ms"], d / "latency_hist.png"),
        "tps_png": tps_timeline(series["tps_timeline"], d / "tps_timeline.png"),
        "availability_png": availability_bar(series["availability"], d / "availability.png"),
    }
