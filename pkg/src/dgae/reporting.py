"""Run artifacts: JSON-lines records, plot-ready CSV, and rendered figures.

Every metrics record carries ``schema_version`` so downstream consumers
can evolve. Figures are rendered beside their CSV counterparts: loss
curves at the end of training, a correlation heatmap for the correlation
task.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA_VERSION = 1

HISTORY_FIELDS = ["epoch", "recon", "kl", "indep", "total", "val_auc", "val_ap"]


def write_history_jsonl(path, history) -> None:
    with open(path, "w") as fh:
        for record in history.records:
            row = {"schema_version": SCHEMA_VERSION}
            row.update(record)
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for record in history.records:
            writer.writerow(record)


def render_loss_curves(path, history) -> None:
    records = history.records
    epochs = [r["epoch"] for r in records]
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.2))
    for key in ("recon", "kl", "indep", "total"):
        series = [(e, r[key]) for e, r in zip(epochs, records) if r.get(key) is not None]
        if series:
            left.plot([s[0] for s in series], [s[1] for s in series], label=key)
    left.set_xlabel("epoch")
    left.set_ylabel("loss")
    left.legend(fontsize=8)
    left.set_title("training losses")

    val = [(r["epoch"], r["val_auc"], r["val_ap"]) for r in records if "val_auc" in r]
    if val:
        right.plot([v[0] for v in val], [v[1] for v in val], label="val AUC")
        right.plot([v[0] for v in val], [v[2] for v in val], label="val AP")
        right.legend(fontsize=8)
    right.set_xlabel("epoch")
    right.set_ylabel("metric")
    right.set_title("validation")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix):
            writer.writerow([f"{v:.10g}" for v in row])


def render_correlation_heatmap(path, matrix: np.ndarray,
                               channel_dim: int | None = None) -> None:
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    image = ax.imshow(matrix, cmap="viridis", vmin=0.0, vmax=1.0)
    if channel_dim:
        for cut in range(channel_dim, matrix.shape[0], channel_dim):
            ax.axhline(cut - 0.5, color="red", linestyle="--", linewidth=0.8)
            ax.axvline(cut - 0.5, color="red", linestyle="--", linewidth=0.8)
    ax.set_title("absolute latent correlation")
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def append_metrics_record(path, record: dict) -> None:
    row = {"schema_version": SCHEMA_VERSION}
    row.update(record)
    with open(path, "a") as fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_metrics_records(paths) -> list[dict]:
    records = []
    for path in paths:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    return records


def summarize_records(records: list[dict]) -> list[dict]:
    """Aggregate runs into mean/stderr rows grouped by (config_hash, task)."""
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for record in records:
        groups[(record.get("config_hash", ""), record.get("task", ""))].append(record)
    skip = {"schema_version", "seed", "epoch"}
    rows = []
    for (config_hash, task), members in sorted(groups.items()):
        row: dict = {"config_hash": config_hash, "task": task, "runs": len(members)}
        numeric_keys = sorted({
            key for member in members for key, value in member.items()
            if isinstance(value, (int, float)) and not isinstance(value, bool)
            and key not in skip
        })
        for key in numeric_keys:
            values = [m[key] for m in members if key in m]
            arr = np.asarray(values, dtype=float)
            row[f"{key}_mean"] = float(arr.mean())
            row[f"{key}_stderr"] = (
                float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
            )
        rows.append(row)
    return rows


def write_summary_csv(path, rows: list[dict]) -> None:
    fieldnames: list[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def ensure_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out
