"""Numeric target-risk bound: complexity term, composite bound, divergence
and joint-risk estimators, and monotonicity scans over label-set sizes.

Everything here is a calculator over explicit inputs; nothing is proved.
Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlp import IDENTITY, LOGISTIC, RECTIFIER, SOFTMAX, cross_entropy, grads_add, \
    init_mlp, l2_normalize_backward, l2_normalize_rows, mlp_backward, mlp_forward, \
    sgd_step, weighted_bce
from .scenario import Dataset

VARY_TARGET_CLASSES = "vary_target_classes"
VARY_COMMON_CLASSES = "vary_common_classes"


@dataclass
class BoundInputs:
    """Inputs of the composite target-risk bound.

    gamma is |Cs|/|Ct|; m_prime is the common-class fraction of the
    per-domain draw (alpha * m); joint_risk is the minimal combined
    source-plus-target risk achievable in the hypothesis class (the
    irreducible term).
    """

    vc_dim: int
    gamma: float
    m_prime: float
    delta: float
    source_risk: float
    empirical_divergence: float
    joint_risk: float

    def validate(self) -> None:
        if self.vc_dim < 1:
            raise ValueError("vc_dim must be a positive integer")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.m_prime <= 0:
            raise ValueError("m_prime must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 <= self.source_risk <= 1.0:
            raise ValueError("source_risk must lie in [0, 1]")
        if not 0.0 <= self.empirical_divergence <= 2.0:
            raise ValueError("empirical_divergence must lie in [0, 2]")
        if self.joint_risk < 0:
            raise ValueError("joint_risk must be nonnegative")


def complexity_term(vc_dim: float, gamma: float, m_prime: float, delta: float) -> float:
    """4 * sqrt((d * ln(2 * max(1, gamma) * m') + ln(2/delta)) / (max(1, gamma) * m')).

    gamma enters only through max(1, gamma): once the target label set is at
    least as large as the source one, the term stops depending on it.
    """
    if vc_dim < 1:
        raise ValueError("vc_dim must be at least 1")
    if m_prime <= 0:
        raise ValueError("m_prime must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    eff = max(1.0, gamma) * m_prime
    if 2.0 * eff <= 1.0:
        raise ValueError("2 * max(1, gamma) * m_prime must exceed 1")
    return 4.0 * math.sqrt((vc_dim * math.log(2.0 * eff) + math.log(2.0 / delta)) / eff)


def risk_bound(inputs: BoundInputs) -> float:
    """source_risk + divergence/2 + complexity term + joint risk."""
    inputs.validate()
    return (inputs.source_risk + 0.5 * inputs.empirical_divergence
            + complexity_term(inputs.vc_dim, inputs.gamma, inputs.m_prime, inputs.delta)
            + inputs.joint_risk)


def bound_decomposition(inputs: BoundInputs) -> dict:
    """The four addends plus their total, keyed for the JSON report."""
    inputs.validate()
    comp = complexity_term(inputs.vc_dim, inputs.gamma, inputs.m_prime, inputs.delta)
    parts = {
        "source_risk": inputs.source_risk,
        "half_divergence": 0.5 * inputs.empirical_divergence,
        "complexity": comp,
        "joint_risk": inputs.joint_risk,
    }
    parts["total"] = sum(parts.values())
    return parts


def default_vc_dim(num_discriminator_params: int) -> int:
    """Default d for reports: discriminator parameter count / 10, capped at 10."""
    return max(1, min(10, num_discriminator_params // 10))


def _train_binary(features: np.ndarray, targets: np.ndarray, hidden: int,
                  steps: int, lr: float, rng: np.random.Generator):
    """Full-batch logistic discriminator used by the divergence proxy."""
    net = init_mlp([features.shape[1], hidden, 1], LOGISTIC, rng)
    ones = np.ones(len(targets))
    for _ in range(steps):
        cache, p = mlp_forward(net, features)
        _, dlog = weighted_bce(p[:, 0], targets, ones)
        grads, _ = mlp_backward(net, cache, dlog[:, None])
        sgd_step(net, grads, lr)
    return net


def proxy_divergence(source_features: np.ndarray, target_features: np.ndarray,
                     seed: int = 0, hidden: int = 8, steps: int = 300,
                     lr: float = 1.0) -> float:
    """Discriminator-based divergence proxy in [0, 2].

    Balances the two sets, trains a fresh binary domain discriminator on half
    of the pooled data, and maps its held-out error through 2 * (1 - 2 * err),
    clamped to [0, 2]. Indistinguishable sets give ~0, separable sets ~2.
    """
    xs = np.asarray(source_features, dtype=float)
    xt = np.asarray(target_features, dtype=float)
    if len(xs) == 0 or len(xt) == 0:
        raise ValueError("both feature sets must be nonempty")
    rng = np.random.default_rng(seed)
    n = min(len(xs), len(xt))
    xs = xs[rng.permutation(len(xs))[:n]]
    xt = xt[rng.permutation(len(xt))[:n]]
    pooled = np.vstack([xs, xt])
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    order = rng.permutation(2 * n)
    pooled, labels = pooled[order], labels[order]
    half = n  # 50/50 split of the pooled set
    net = _train_binary(pooled[:half], labels[:half], hidden, steps, lr, rng)
    _, p = mlp_forward(net, pooled[half:])
    err = float(((p[:, 0] >= 0.5) != (labels[half:] == 1)).mean())
    return float(np.clip(2.0 * (1.0 - 2.0 * err), 0.0, 2.0))


def lambda_oracle(source: Dataset, target: Dataset, seed: int = 0,
                  widths: tuple[int, ...] = (32, 16), steps: int = 600,
                  lr: float = 0.5) -> float:
    """Upper estimate of the irreducible joint risk.

    Trains one fresh classifier on the union of the labeled source set and
    the common-class target samples (using their held-out oracle labels;
    diagnostic only) and returns the sum of its empirical error rates on the
    two parts.
    """
    common = set(source.label_sets.common)
    mask = np.asarray([int(y) in common for y in target.labels])
    if not mask.any():
        raise ValueError("target set has no common-class samples")
    xt, yt = target.features[mask], target.labels[mask]
    xs, ys = source.features, source.labels
    num_classes = len(source.label_sets.source_classes)
    x_all = np.vstack([xs, xt])
    y_all = np.concatenate([ys, yt])
    rng = np.random.default_rng(seed)
    feat = init_mlp([x_all.shape[1], *widths], IDENTITY, rng,
                    activations=[RECTIFIER] * len(widths))
    head = init_mlp([widths[-1], num_classes], SOFTMAX, rng)
    for _ in range(steps):
        f_cache, z = mlp_forward(feat, x_all)
        zn = l2_normalize_rows(z)
        h_cache, probs = mlp_forward(head, zn)
        _, d_logits = cross_entropy(probs, y_all)
        h_grads, d_zn = mlp_backward(head, h_cache, d_logits)
        d_z = l2_normalize_backward(z, d_zn)
        f_grads, _ = mlp_backward(feat, f_cache, d_z)
        sgd_step(feat, f_grads, lr)
        sgd_step(head, h_grads, lr)

    def error_rate(x: np.ndarray, y: np.ndarray) -> float:
        _, z = mlp_forward(feat, x)
        _, probs = mlp_forward(head, l2_normalize_rows(z))
        return float((probs.argmax(axis=1) != y).mean())

    return error_rate(xs, ys) + error_rate(xt, yt)


@dataclass
class ScanRow:
    parameter: float
    bound: float
    verdict: str       # "start" | "increasing" | "decreasing" | "constant"
    gamma: float
    m_prime: float
    guaranteed_monotone: bool


def property_scan(vc_dim: float, delta: float, m: float, mode: str, grid,
                  num_source_classes: int = 15, num_common: int = 10,
                  gamma: float = 1.0) -> list[ScanRow]:
    """Evaluate the complexity term along a label-set sweep and record the
    literal pairwise comparisons.

    vary_target_classes: grid holds |Ct| values; alpha is fixed by
    num_common/num_source_classes and gamma = |Cs|/|Ct| varies. The
    guaranteed flag marks gamma > 1 (where the term genuinely moves).
    vary_common_classes: grid holds alpha values at fixed gamma; the
    guaranteed flag marks alpha >= e/(2 * max(1, gamma) * m), the region
    where the term provably decreases.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")
    rows: list[ScanRow] = []
    prev = None
    for value in grid:
        if mode == VARY_TARGET_CLASSES:
            g = num_source_classes / value
            alpha = num_common / num_source_classes
            guaranteed = g > 1.0
        elif mode == VARY_COMMON_CLASSES:
            g = gamma
            alpha = value
            guaranteed = alpha >= math.e / (2.0 * max(1.0, g) * m)
        else:
            raise ValueError(f"unknown scan mode {mode!r}")
        m_prime = alpha * m
        b = complexity_term(vc_dim, g, m_prime, delta)
        if prev is None:
            verdict = "start"
        elif b > prev:
            verdict = "increasing"
        elif b < prev:
            verdict = "decreasing"
        else:
            verdict = "constant"
        rows.append(ScanRow(float(value), b, verdict, g, m_prime, guaranteed))
        prev = b
    return rows
