"""Learning-curve figures for elicitation results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METRICS = {
    "kendall_social": "social Kendall correlation",
    "kendall_personal_mean": "mean personalized Kendall correlation",
}


def mean_curves(rows, metric):
    """Per-criterion mean of ``metric`` by round, averaged over seeds.

    ``rows`` are dicts keyed by the results-table columns.  Returns
    ``{criterion: (rounds, means)}`` with criteria in first-seen order.
    """
    acc = {}
    for row in rows:
        value = float(row[metric])
        if np.isnan(value):
            continue
        acc.setdefault(row["criterion"], {}).setdefault(int(row["round"]), []).append(value)
    curves = {}
    for crit, by_round in acc.items():
        rounds = np.array(sorted(by_round))
        curves[crit] = (rounds, np.array([np.mean(by_round[r]) for r in rounds]))
    return curves


def plot_learning_curves(rows, out_dir, initial_count=0):
    """Write one PNG per metric and return the written paths.

    The x axis counts rankings collected (``initial_count + round``).  Metrics
    with no finite values (e.g. social Kendall without ground truth) are
    skipped.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, label in METRICS.items():
        curves = mean_curves(rows, metric)
        if not curves:
            continue
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for crit, (rounds, means) in curves.items():
            ax.plot(rounds + initial_count, means, label=crit, linewidth=1.5)
        ax.set_xlabel("rankings collected")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / f"learning_curve_{metric}.png"
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
