"""Inference with unknown-class rejection and the target-domain protocol.

Target samples from target-private classes are pooled into one synthetic
"unknown" class; the headline metric is per-class accuracy averaged over the
common classes plus unknown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import Dataset, LabelSets
from .trainer import AdaptationModel, classify
from .weighting import MarginRegister, NormalizationConfig, WeightBatch, \
    normalize_weights, source_weights, target_weights

UNKNOWN = "unknown"

GROUPS = ("source_shared", "source_private", "target_shared", "target_private")


@dataclass
class Prediction:
    """Known-class decision (label) or rejection (label=None), with the
    maximum class probability as confidence."""

    label: int | None
    confidence: float

    @property
    def is_unknown(self) -> bool:
        return self.label is None


@dataclass
class EvalReport:
    per_class_accuracy: dict  # class index or "unknown" -> accuracy
    averaged_accuracy: float
    threshold: float
    per_class_counts: dict = field(default_factory=dict)
    group_weight_stats: dict | None = None


def infer(model: AdaptationModel, x: np.ndarray, threshold: float = 0.5) -> Prediction:
    """Classify one feature vector, rejecting as unknown below the confidence
    threshold; confidence exactly at the threshold counts as known."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    probs = classify(model, np.asarray(x, dtype=float).reshape(1, -1))[0]
    label = int(np.argmax(probs))
    conf = float(probs[label])
    return Prediction(label if conf >= threshold else None, conf)


def infer_batch(model: AdaptationModel, inputs: np.ndarray,
                threshold: float = 0.5) -> list[Prediction]:
    """Vectorized infer over the rows of `inputs`."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    probs = classify(model, inputs)
    labels = probs.argmax(axis=1)
    confs = probs[np.arange(len(probs)), labels]
    return [Prediction(int(l) if c >= threshold else None, float(c))
            for l, c in zip(labels, confs)]


def uda_accuracy(predictions: list[Prediction], true_labels: np.ndarray,
                 label_sets: LabelSets, threshold: float = 0.5) -> EvalReport:
    """Per-class accuracy over the common classes plus the pooled unknown
    class, averaged with equal class weight.

    Common-class samples predicted unknown count as errors for their class.
    Classes with no evaluation samples are left out of the average.
    """
    y = np.asarray(true_labels)
    if len(predictions) != y.size:
        raise ValueError("predictions and labels must be aligned")
    common = list(label_sets.common)
    src_private = set(label_sets.source_private)
    tgt_private = set(label_sets.target_private)
    if any(int(c) in src_private for c in y):
        raise ValueError("target samples cannot carry source-private labels")
    valid = set(label_sets.target_classes)
    bad = [int(c) for c in y if int(c) not in valid]
    if bad:
        raise ValueError(f"label {bad[0]} is not a target class")
    correct: dict = {c: 0 for c in common}
    totals: dict = {c: 0 for c in common}
    correct[UNKNOWN] = 0
    totals[UNKNOWN] = 0
    for pred, label in zip(predictions, y.tolist()):
        key = UNKNOWN if label in tgt_private else label
        totals[key] += 1
        if key == UNKNOWN:
            correct[key] += pred.is_unknown
        else:
            correct[key] += (not pred.is_unknown) and pred.label == label
    per_class = {k: correct[k] / totals[k] for k in correct if totals[k] > 0}
    avg = float(np.mean([per_class[k] for k in per_class]))
    return EvalReport(per_class, avg, threshold,
                      per_class_counts={k: totals[k] for k in per_class})


def weight_density_groups(weights: np.ndarray, domains: np.ndarray,
                          labels: np.ndarray, label_sets: LabelSets) -> dict:
    """Partition tagged weights into the four analysis groups:
    source/target crossed with shared (common label) / private."""
    w = np.asarray(weights, dtype=float)
    dom = np.asarray(domains)
    y = np.asarray(labels)
    if not (w.shape == dom.shape == y.shape):
        raise ValueError("weights, domains and labels must be aligned")
    common = set(label_sets.common)
    src_private = set(label_sets.source_private)
    tgt_private = set(label_sets.target_private)
    groups: dict = {g: [] for g in GROUPS}
    for wi, di, yi in zip(w, dom, y.tolist()):
        if di == "source":
            if yi in common:
                groups["source_shared"].append(wi)
            elif yi in src_private:
                groups["source_private"].append(wi)
            else:
                raise ValueError(f"source sample labeled {yi} is not a source class")
        elif di == "target":
            if yi in common:
                groups["target_shared"].append(wi)
            elif yi in tgt_private:
                groups["target_private"].append(wi)
            else:
                raise ValueError(f"target sample labeled {yi} is not a target class")
        else:
            raise ValueError(f"unknown domain tag {di!r}")
    return {g: np.asarray(v) for g, v in groups.items()}


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


def collect_weight_groups(model: AdaptationModel, register: MarginRegister,
                          source: Dataset, target: Dataset,
                          w0: int | None = None) -> dict:
    """Compute the trained model's sample weights over whole domains and
    partition them for density analysis.

    With w0=None (the density-analysis default) each domain's weights are
    min-max scaled to [0, 1], the form the densities are plotted in; passing
    an integer w0 applies the full training-time normalization instead.
    """
    ws = source_weights(register, source.labels)
    wt = target_weights(classify(model, target.features))
    if w0 is None:
        ws_vals, wt_vals = _minmax(ws.values), _minmax(wt.values)
    else:
        ws_vals = normalize_weights(ws, NormalizationConfig(w0)).values
        wt_vals = normalize_weights(wt, NormalizationConfig(w0)).values
    weights = np.concatenate([ws_vals, wt_vals])
    domains = np.asarray(["source"] * len(source) + ["target"] * len(target))
    labels = np.concatenate([source.labels, target.labels])
    return weight_density_groups(weights, domains, labels, source.label_sets)


def per_class_gain(method_report: EvalReport, baseline_report: EvalReport) -> dict:
    """Per-class accuracy difference (method minus baseline); negative values
    flag negative transfer."""
    mk = set(method_report.per_class_accuracy)
    bk = set(baseline_report.per_class_accuracy)
    if mk != bk:
        raise ValueError("reports cover different class sets")
    return {k: method_report.per_class_accuracy[k] - baseline_report.per_class_accuracy[k]
            for k in method_report.per_class_accuracy}
