"""Render round logs into figures and a delimited table.

Reads one or more ``rounds.jsonl`` files, writes a combined ``rounds.csv``
and two PNG figures (test-metric AUC vs round, train objective vs round),
one series per input log.  Series labels come from a sibling manifest when
available.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

FIELDS = ["run", "round", "stage", "epoch", "group", "eta", "local_steps", "objective", "auc"]


def load_round_log(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad round record: {exc}") from None
    return rows


def _series_label(path: Path) -> str:
    manifest = path.parent / "manifest.json"
    if manifest.exists():
        try:
            with open(manifest, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            return f"{meta['algorithm']}-seed{meta['seed']}"
        except (json.JSONDecodeError, KeyError):
            pass
    return path.parent.name or path.stem


def write_report(log_paths: list[str | Path], out_dir: str | Path) -> list[Path]:
    """Produce rounds.csv, auc_vs_round.png and objective_vs_round.png."""
    if not log_paths:
        raise ValueError("need at least one round log")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = []
    for raw_path in log_paths:
        path = Path(raw_path)
        rows = load_round_log(path)
        if not rows:
            raise ValueError(f"{path}: empty round log")
        series.append((_series_label(path), rows))

    csv_path = out / "rounds.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDS)
        writer.writeheader()
        for label, rows in series:
            for row in rows:
                writer.writerow({"run": label, **{k: row.get(k) for k in FIELDS[1:]}})

    written = [csv_path]
    for metric, fname, ylabel in (
        ("auc", "auc_vs_round.png", "evaluation AUC"),
        ("objective", "objective_vs_round.png", "train objective"),
    ):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for label, rows in series:
            xs = [row["round"] for row in rows]
            ys = [row[metric] for row in rows]
            ax.plot(xs, ys, label=label, linewidth=1.2)
        ax.set_xlabel("communication round")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig_path = out / fname
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written
