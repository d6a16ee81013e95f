"""Figure rendering for experiment reports.

Every function takes data plus an output path and writes one PNG; the
numeric CSV/JSON reports stay the source of truth, these are companions for
eyeballing runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bound import ScanRow
from .scenario import LabelSets
from .trainer import TrainTrace
from .weighting import MarginRegister

GROUP_COLORS = {
    "source_shared": "tab:blue",
    "source_private": "tab:orange",
    "target_shared": "tab:green",
    "target_private": "tab:red",
}


def save_weight_density(groups: dict, path, bins: int = 40) -> None:
    """Overlaid histograms of the four weight groups."""
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = [v for v in groups.values() if len(v)]
    lo = min(float(np.min(v)) for v in finite) if finite else 0.0
    hi = max(float(np.max(v)) for v in finite) if finite else 1.0
    edges = np.linspace(lo, hi + 1e-9, bins + 1)
    for name, values in groups.items():
        if len(values) == 0:
            continue
        ax.hist(values, bins=edges, density=True, alpha=0.45,
                label=name.replace("_", " "), color=GROUP_COLORS.get(name))
    ax.set_xlabel("weight")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_curves(trace: TrainTrace, path) -> None:
    steps = [r.step for r in trace.records]
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    axes[0].plot(steps, [r.e_g for r in trace.records], lw=0.8)
    axes[0].set_ylabel("classifier loss")
    axes[1].plot(steps, [r.e_d for r in trace.records], lw=0.8, color="tab:orange")
    axes[1].set_ylabel("domain loss")
    axes[2].plot(steps, [r.source_error for r in trace.records], lw=0.8, color="tab:green")
    axes[2].set_ylabel("source error")
    axes[2].set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_register_profile(register: MarginRegister, label_sets: LabelSets, path) -> None:
    """Per-class register values, common classes vs source-private."""
    common = set(label_sets.common)
    classes = list(label_sets.source_classes)
    colors = ["tab:blue" if c in common else "tab:orange" for c in classes]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([str(c) for c in classes], register.vector, color=colors)
    ax.set_xlabel("source class")
    ax.set_ylabel("register value")
    handles = [plt.Rectangle((0, 0), 1, 1, color="tab:blue"),
               plt.Rectangle((0, 0), 1, 1, color="tab:orange")]
    ax.legend(handles, ["common", "source private"])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_scan_curve(rows: list[ScanRow], xlabel: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r.parameter for r in rows]
    ys = [r.bound for r in rows]
    ax.plot(xs, ys, marker="o")
    for r in rows:
        if not r.guaranteed_monotone:
            ax.plot([r.parameter], [r.bound], marker="o", color="tab:red")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("complexity term")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_curve(values, accs_by_value: dict, path, xlabel: str) -> None:
    """Mean with min/max band of averaged accuracy per sweep value."""
    fig, ax = plt.subplots(figsize=(6, 4))
    means = [float(np.mean(accs_by_value[v])) for v in values]
    lows = [float(np.min(accs_by_value[v])) for v in values]
    highs = [float(np.max(accs_by_value[v])) for v in values]
    ax.plot(values, means, marker="o")
    ax.fill_between(values, lows, highs, alpha=0.25)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("averaged accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
