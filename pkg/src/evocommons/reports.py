"""Run reports: reward-network weight distributions and metric plots.

The weight report summarizes every genotype parameter across the reward
population: one row per scalar parameter (v and b from the output layer, W
from the input layer), each carrying summary statistics and a 10-bin
histogram. Schema columns:

    param, layer, count, mean, std, min, p25, median, p75, max,
    hist_lo, hist_hi, hist_counts ('|'-separated)
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import IntegrityError
from .harness import RunPaths
from .metrics import METRIC_COLUMNS

WEIGHT_REPORT_SCHEMA = "# evocommons-weight-report-v1"
WEIGHT_REPORT_COLUMNS = ["param", "layer", "count", "mean", "std", "min", "p25",
                         "median", "p75", "max", "hist_lo", "hist_hi", "hist_counts"]
HISTOGRAM_BINS = 10


def _summary_row(name: str, layer: int, values: np.ndarray) -> dict:
    values = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(values, bins=HISTOGRAM_BINS)
    return {
        "param": name,
        "layer": layer,
        "count": values.size,
        "mean": float(values.mean()),
        "std": float(values.std()),
        "min": float(values.min()),
        "p25": float(np.percentile(values, 25)),
        "median": float(np.median(values)),
        "p75": float(np.percentile(values, 75)),
        "max": float(values.max()),
        "hist_lo": float(edges[0]),
        "hist_hi": float(edges[-1]),
        "hist_counts": "|".join(str(int(c)) for c in counts),
    }


def report_weights(checkpoint_path: str, out_csv: str | None = None) -> list:
    """Per-parameter distribution summary of the reward population.

    Row order: v entries, b entries (the output layer, the paper-interesting
    ones), then W entries by (feature, hidden) index. Optionally writes the
    rows as CSV.
    """
    with open(checkpoint_path) as fh:
        doc = json.load(fh)
    population = doc.get("reward_population")
    if not population:
        raise IntegrityError("checkpoint holds no reward population")
    header = population[0]["header"]
    n_players, hidden = header["num_players"], header["hidden"]
    flats = np.asarray([item["theta_flat"] for item in population], dtype=np.float64)
    nw = n_players * hidden

    rows = []
    for k in range(hidden):
        rows.append(_summary_row(f"v[{k}]", 2, flats[:, nw + hidden + k]))
    for k in range(hidden):
        rows.append(_summary_row(f"b[{k}]", 2, flats[:, nw + k]))
    for j in range(n_players):
        for k in range(hidden):
            # column-major W layout: entry (j, k) sits at k * n_players + j
            rows.append(_summary_row(f"W[{j}][{k}]", 1, flats[:, k * n_players + j]))

    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            fh.write(WEIGHT_REPORT_SCHEMA + "\n")
            writer = csv.DictWriter(fh, fieldnames=WEIGHT_REPORT_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v
                                 for k, v in row.items()})
    return rows


def read_episode_table(run_dir: str) -> dict:
    """episodes.csv as column arrays (numeric columns parsed as float)."""
    path = RunPaths(run_dir).episodes_csv
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(lines)
    columns = {name: [] for name in reader.fieldnames}
    for row in reader:
        for name, value in row.items():
            columns[name].append(value)
    out = {}
    for name, values in columns.items():
        try:
            out[name] = np.asarray([float(v) for v in values])
        except ValueError:
            out[name] = np.asarray(values)
    return out


def _rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    if len(x) < 2 or window <= 1:
        return x
    window = min(window, len(x))
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def plot_run(run_dir: str, out_png: str | None = None, window: int = 10) -> str:
    """2x2 panel of the social-outcome metrics over training."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    table = read_episode_table(run_dir)
    episodes = table["episode"]
    fig, axes = plt.subplots(2, 2, figsize=(11, 7), sharex=True)
    for ax, name in zip(axes.ravel(), METRIC_COLUMNS):
        values = table[name]
        ok = np.isfinite(values)
        ax.plot(episodes[ok], values[ok], alpha=0.3, lw=0.8)
        smooth = _rolling_mean(values[ok], window)
        if len(smooth) > 1:
            ax.plot(episodes[ok][len(values[ok]) - len(smooth):], smooth, lw=1.8)
        ax.set_title(name)
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("episode")
    fig.suptitle(os.path.basename(os.path.normpath(run_dir)))
    fig.tight_layout()
    out = out_png or os.path.join(run_dir, "metrics.png")
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out
