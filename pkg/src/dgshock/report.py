"""Run artifacts: delimited snapshot tables, JSON documents and figures.

CSV and JSON are the canonical outputs; the PNG figures are rendered from the
same arrays for quick inspection.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SNAPSHOT_COLUMNS = ("x", "u_numeric", "u_exact", "abs_error")


def snapshot_filename(solver: str, t: float) -> str:
    return f"snapshot_{solver}_t{t:.4f}.csv"


def write_snapshot_csv(path, x: np.ndarray, numeric: np.ndarray, exact: np.ndarray | None):
    """One row per DOF in mesh order; interface coordinates appear twice."""
    x = np.asarray(x, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    exact = np.full_like(numeric, np.nan) if exact is None else np.asarray(exact, dtype=float).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for row in zip(x, numeric, exact, np.abs(numeric - exact)):
            w.writerow([repr(float(v)) for v in row])


def read_snapshot_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in SNAPSHOT_COLUMNS}


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def plot_snapshots(path, x: np.ndarray, fields: dict, exact: dict | None, title: str = ""):
    """One panel per snapshot time.

    ``fields`` maps a solver label to ``{t: nodal field}``; ``exact`` maps
    ``t`` to the reference at the same nodes. Each element is drawn as its own
    segment so jumps stay visible.
    """
    times = sorted({t for per in fields.values() for t in per})
    fig, axes = plt.subplots(1, len(times), figsize=(4.2 * len(times), 3.4), squeeze=False)
    styles = {"network": dict(color="tab:red", lw=1.6), "oracle": dict(color="tab:blue", lw=1.0, ls="--")}
    for ax, t in zip(axes[0], times):
        if exact is not None and t in exact:
            ax.plot(x.ravel(), np.asarray(exact[t]).ravel(), color="0.6", lw=3, label="exact")
        for label, per in fields.items():
            if t not in per:
                continue
            u = np.asarray(per[t])
            style = styles.get(label, {})
            for k in range(u.shape[0]):
                ax.plot(x[k], u[k], label=label if k == 0 else None, **style)
        ax.set_title(f"{title} t = {t:g}".strip())
        ax.set_xlabel("x")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("u")
    axes[0][0].legend(loc="best", fontsize=8)
    _save(fig, path)


def plot_training(path, history: list[dict]):
    """Loss and learning rate against the global epoch counter."""
    loss = [r["loss"] for r in history]
    lr = [r["lr"] for r in history]
    fig, ax = plt.subplots(figsize=(6.5, 3.4))
    ax.semilogy(loss, lw=0.8, color="tab:red", label="loss")
    ax.set_xlabel("epoch (all time steps)")
    ax.set_ylabel("L1 residual loss")
    ax2 = ax.twinx()
    ax2.semilogy(lr, lw=0.8, color="tab:gray", label="lr")
    ax2.set_ylabel("learning rate")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_convergence(path, rows: list[dict]):
    h = np.array([r["h"] for r in rows])
    e = np.array([r["L2"] for r in rows])
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    ax.loglog(h, e, "o-", label="L2 error")
    if len(h) > 1:
        ax.loglog(h, e[0] * (h / h[0]) ** 2, "k:", label="slope 2")
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)
