"""Prediction margins, the per-class margin register, and batch weight rules.

The register accumulates, class by class, how confidently target samples are
pseudo-labeled as each source class; that running mean is the probability-of-
commonness used to weight source samples during adversarial alignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MarginRegister:
    """Running mean of per-batch margin vectors, one slot per source class."""

    num_classes: int
    vector: np.ndarray = field(default=None)  # type: ignore[assignment]
    update_count: int = 0

    def __post_init__(self) -> None:
        if self.vector is None:
            self.vector = np.zeros(self.num_classes)
        else:
            self.vector = np.asarray(self.vector, dtype=float)
        if self.vector.shape != (self.num_classes,):
            raise ValueError("register vector length must equal num_classes")

    def copy(self) -> "MarginRegister":
        return MarginRegister(self.num_classes, self.vector.copy(), self.update_count)


@dataclass
class WeightBatch:
    """A batch of sample weights tagged with the domain they came from."""

    values: np.ndarray
    origin: str  # "source" | "target"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class NormalizationConfig:
    """w0 is the activation threshold (0 keeps everything, 1 keeps only
    above-average weights); batch_size is the expected weight count."""

    w0: int = 0
    batch_size: int | None = None

    def __post_init__(self) -> None:
        if self.w0 not in (0, 1):
            raise ValueError("w0 must be 0 or 1")


def prediction_margin(prob_row: np.ndarray) -> tuple[int, float]:
    """Pseudo-label and its margin: top-1 minus top-2 predicted probability.

    Ties break to the smallest class index (the margin is then 0).
    """
    p = np.asarray(prob_row, dtype=float).ravel()
    if p.size < 2:
        raise ValueError("need at least two classes to form a margin")
    label = int(np.argmax(p))
    top1 = p[label]
    rest = np.delete(p, label)
    return label, float(top1 - rest.max())


def batch_margin_vector(prob_rows: np.ndarray, num_classes: int) -> np.ndarray:
    """Per-class mean margin over the rows pseudo-labeled as that class.

    Classes with no assigned rows contribute 0; an empty batch yields the
    all-zero vector.
    """
    p = np.asarray(prob_rows, dtype=float)
    out = np.zeros(num_classes)
    if p.size == 0:
        return out
    if p.ndim != 2 or p.shape[1] != num_classes:
        raise ValueError(f"prob_rows must be (n, {num_classes})")
    labels = p.argmax(axis=1)
    part = np.partition(p, -2, axis=1)
    margins = part[:, -1] - part[:, -2]
    for c in range(num_classes):
        mask = labels == c
        if mask.any():
            out[c] = margins[mask].mean()
    return out


def tmr_update(register: MarginRegister, batch_margins: np.ndarray) -> MarginRegister:
    """Fold one batch margin vector into the register's running mean:
    V_{t+1} = (t * V_t + batch) / (t + 1), and bump the counter."""
    m = np.asarray(batch_margins, dtype=float)
    if m.shape != register.vector.shape:
        raise ValueError("batch margin vector length does not match register")
    t = register.update_count
    new_vec = (t * register.vector + m) / (t + 1)
    return MarginRegister(register.num_classes, new_vec, t + 1)


def source_weights(register: MarginRegister, labels: np.ndarray) -> WeightBatch:
    """Class-wise source weights: every sample gets its class's register value."""
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= register.num_classes):
        raise IndexError("source label outside the register's class range")
    return WeightBatch(register.vector[y], "source")


def target_weights(prob_rows: np.ndarray) -> WeightBatch:
    """Target weights: the highest predicted class probability per row."""
    p = np.asarray(prob_rows, dtype=float)
    return WeightBatch(p.max(axis=1), "target")


def normalize_weights(weights: WeightBatch, config: NormalizationConfig) -> WeightBatch:
    """Min-max normalize, rescale to mean one, then apply the w0 threshold.

    wbar = (w - min) / (max - min); scaled = b * wbar / sum(wbar); the result
    is max(scaled - w0, 0). A degenerate batch (max == min) maps to all ones
    before thresholding, so the mean-one property holds there too.
    """
    w = np.asarray(weights.values, dtype=float)
    b = w.size
    if b == 0:
        raise ValueError("cannot normalize an empty weight batch")
    if config.batch_size is not None and config.batch_size != b:
        raise ValueError(f"batch size {config.batch_size} does not match {b} weights")
    lo, hi = w.min(), w.max()
    if hi == lo:
        wbar = np.ones_like(w)
    else:
        wbar = (w - lo) / (hi - lo)
    scaled = b * wbar / wbar.sum()
    return WeightBatch(np.maximum(scaled - config.w0, 0.0), weights.origin)
