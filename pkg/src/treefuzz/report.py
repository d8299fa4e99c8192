"""Report emission: metrics JSON, time-series CSV and the activation figure.

The metrics JSON contains only deterministic quantities (counts and
request-indexed series), so two runs with the same seed against the same
target produce byte-identical files. Wall-clock data goes to the CSV, and
the rendered figure shows activation growth over time next to it.
"""

import csv
import json
from pathlib import Path

from .runner import RunMetrics

FIG_WIDTH = 8.0
GOLDEN = 0.618


def write_metrics(metrics: RunMetrics, path: str | Path) -> None:
    payload = json.dumps(metrics.to_json_dict(), sort_keys=True, indent=2)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def write_timeseries_csv(metrics: RunMetrics, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["elapsed_seconds", "requests", "activated"])
        for elapsed, requests, activated in metrics.wall_series:
            writer.writerow([elapsed, requests, activated])


def render_activation_plot(metrics: RunMetrics, path: str | Path) -> None:
    """Activation growth over elapsed time, saved as a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    times = [point[0] for point in metrics.wall_series]
    activated = [point[2] for point in metrics.wall_series]

    fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH * GOLDEN))
    ax.step(times, activated, where="post", lw=2,
            label=f"{metrics.strategy} (seed {metrics.seed})")
    ax.axhline(metrics.total_operations, color="gray", ls="--", lw=1, label="total operations")
    ax.set_xlabel("elapsed time (s)")
    ax.set_ylabel("operations activated")
    ax.set_title("API activation over time")
    ax.set_ylim(bottom=0)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
