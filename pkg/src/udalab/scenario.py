"""Deterministic synthetic scenarios with configurable label-set overlap.

Classes are isotropic Gaussian blobs whose means sit at equally spaced
angles on a circle (embedded in the first two feature dimensions). The
target domain reuses the class layout, rigidly moved by a rotation plus
translation, with fresh noise. Class indices are laid out common first,
then source-private, then target-private.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

SOURCE = "source"
TARGET = "target"

# xi inputs are ratios of class counts; snapping to the nearest rational with
# a small denominator makes the fraction form agree bit-for-bit with the
# set-based value.
_MAX_COUNT_DENOMINATOR = 10**6


class Sample(NamedTuple):
    features: np.ndarray
    true_label: int
    domain: str


@dataclass(frozen=True)
class LabelSets:
    """The label-set partition: source and target class sets plus the derived
    common / source-private / target-private split."""

    source_classes: tuple[int, ...]
    target_classes: tuple[int, ...]

    @staticmethod
    def from_sets(source_classes, target_classes) -> "LabelSets":
        return LabelSets(tuple(dict.fromkeys(source_classes)),
                         tuple(dict.fromkeys(target_classes)))

    @staticmethod
    def from_counts(num_common: int, num_source_private: int,
                    num_target_private: int) -> "LabelSets":
        common = tuple(range(num_common))
        src_priv = tuple(range(num_common, num_common + num_source_private))
        tgt_priv = tuple(range(num_common + num_source_private,
                               num_common + num_source_private + num_target_private))
        return LabelSets(common + src_priv, common + tgt_priv)

    @property
    def common(self) -> tuple[int, ...]:
        tgt = set(self.target_classes)
        return tuple(c for c in self.source_classes if c in tgt)

    @property
    def source_private(self) -> tuple[int, ...]:
        tgt = set(self.target_classes)
        return tuple(c for c in self.source_classes if c not in tgt)

    @property
    def target_private(self) -> tuple[int, ...]:
        src = set(self.source_classes)
        return tuple(c for c in self.target_classes if c not in src)


@dataclass
class ScenarioConfig:
    feature_dim: int = 2
    num_common: int = 4
    num_source_private: int = 2
    num_target_private: int = 3
    samples_per_class: int = 100
    class_separation: float = 2.0
    rotation_deg: float = 25.0
    translation: tuple[float, ...] = (0.0, 0.0)
    noise_scale: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be at least 2")
        if min(self.num_common, self.num_source_private, self.num_target_private) < 0:
            raise ValueError("class counts must be nonnegative")
        if self.num_common + self.num_source_private < 1:
            raise ValueError("the source domain needs at least one class")
        if self.num_common + self.num_source_private + self.num_target_private < 1:
            raise ValueError("scenario has zero classes")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        if len(self.translation) != self.feature_dim:
            raise ValueError("translation length must equal feature_dim")


@dataclass
class Dataset:
    features: np.ndarray  # (n, feature_dim)
    labels: np.ndarray    # (n,) int
    domain: str
    label_sets: LabelSets

    def __len__(self) -> int:
        return self.features.shape[0]

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return dict(zip(values.tolist(), counts.tolist()))

    def samples(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(self.features[i], int(self.labels[i]), self.domain)


def _riffle(long: list[int], short: list[int]) -> list[int]:
    """Merge two lists, spreading the shorter one as evenly as possible."""
    if len(long) < len(short):
        long, short = short, long
    if not short:
        return list(long)
    out: list[int] = []
    ratio = len(long) / (len(short) + 1)
    inserted = 0
    for i, item in enumerate(long):
        out.append(item)
        while inserted < len(short) and (i + 1) >= ratio * (inserted + 1):
            out.append(short[inserted])
            inserted += 1
    out.extend(short[inserted:])
    return out


def _angle_order(config: ScenarioConfig) -> list[int]:
    """Slot order around the circle: target-private classes are spread between
    the common classes (so unknown-class samples sit in contested regions
    between known prototypes), with source-private classes on a contiguous
    arc at the end."""
    ls = LabelSets.from_counts(config.num_common, config.num_source_private,
                               config.num_target_private)
    return _riffle(list(ls.common), list(ls.target_private)) + list(ls.source_private)


def _class_means(config: ScenarioConfig) -> np.ndarray:
    total = config.num_common + config.num_source_private + config.num_target_private
    order = _angle_order(config)
    slot = np.empty(total, dtype=int)
    slot[order] = np.arange(total)
    angles = 2.0 * np.pi * slot / total
    means = np.zeros((total, config.feature_dim))
    means[:, 0] = config.class_separation * np.cos(angles)
    means[:, 1] = config.class_separation * np.sin(angles)
    return means


def _shift_means(means: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    theta = np.deg2rad(config.rotation_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    moved = means.copy()
    moved[:, :2] = means[:, :2] @ rot.T
    return moved + np.asarray(config.translation, dtype=float)


def _draw_blobs(means: np.ndarray, class_ids: tuple[int, ...], config: ScenarioConfig,
                rng: np.random.Generator, domain: str, label_sets: LabelSets) -> Dataset:
    n = config.samples_per_class
    feats, labels = [], []
    for c in class_ids:
        noise = rng.normal(0.0, 1.0, size=(n, config.feature_dim))
        feats.append(means[c] + config.noise_scale * noise)
        labels.append(np.full(n, c, dtype=int))
    return Dataset(np.vstack(feats), np.concatenate(labels), domain, label_sets)


def build_scenario(config: ScenarioConfig) -> tuple[Dataset, Dataset, LabelSets]:
    """Generate (source, target, label_sets) deterministically from the config."""
    config.validate()
    label_sets = LabelSets.from_counts(
        config.num_common, config.num_source_private, config.num_target_private)
    means = _class_means(config)
    rng = np.random.default_rng(config.seed)
    source = _draw_blobs(means, label_sets.source_classes, config, rng, SOURCE, label_sets)
    target = _draw_blobs(_shift_means(means, config), label_sets.target_classes,
                         config, rng, TARGET, label_sets)
    return source, target, label_sets


def jaccard_index(label_sets: LabelSets) -> float:
    """Label-set overlap |Cs ^ Ct| / |Cs u Ct| in [0, 1]."""
    src, tgt = set(label_sets.source_classes), set(label_sets.target_classes)
    union = src | tgt
    if not union:
        raise ValueError("both label sets are empty")
    return len(src & tgt) / len(union)


def xi_from_fractions(alpha: float, beta: float, form: str = "consistent") -> float:
    """Overlap from the common-class fractions alpha = |C|/|Cs|, beta = |C|/|Ct|.

    The default form, alpha*beta / (alpha + beta - alpha*beta), is the one
    consistent with the set definition: evaluated in exact rational
    arithmetic it reproduces jaccard_index bit for bit. form="variant"
    evaluates an alternative published algebraic form,
    alpha*beta / ((1-alpha)(alpha+beta) + alpha), which disagrees with the
    set definition for most inputs and exists only for diagnostic comparison.
    """
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError("alpha and beta must lie in [0, 1]")
    if alpha == 0.0 and beta == 0.0:
        raise ValueError("alpha and beta cannot both be zero")
    a = Fraction(alpha).limit_denominator(_MAX_COUNT_DENOMINATOR)
    b = Fraction(beta).limit_denominator(_MAX_COUNT_DENOMINATOR)
    if form == "consistent":
        denom = a + b - a * b
        if denom == 0:
            raise ValueError("alpha + beta - alpha*beta must be nonzero")
        return float(a * b / denom)
    if form == "variant":
        denom = (1 - a) * (a + b) + a
        if denom == 0:
            raise ValueError("variant form denominator is zero")
        return float(a * b / denom)
    raise ValueError(f"unknown form {form!r}")


def balanced_batches(dataset: Dataset, batch_size: int, rng: np.random.Generator,
                     epochs: int | None = 1) -> Iterator[np.ndarray]:
    """Yield index batches; every sample appears exactly once per epoch and
    per-batch class counts differ by at most one.

    Samples are arranged in rounds of one draw per class (class order
    reshuffled every round) and the flat order is sliced into batches, so
    any contiguous slice is as class-balanced as its length allows.
    epochs=None streams forever.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    classes = dataset.classes()
    k = classes.size
    if batch_size < k:
        raise ValueError(f"batch_size {batch_size} is smaller than the class count {k}")
    by_class = [np.flatnonzero(dataset.labels == c) for c in classes]
    per_class = {len(ix) for ix in by_class}
    if len(per_class) != 1:
        raise ValueError("balanced batching requires a class-balanced dataset")
    n = per_class.pop()
    epoch = 0
    while epochs is None or epoch < epochs:
        shuffled = [rng.permutation(ix) for ix in by_class]
        order = np.empty(n * k, dtype=int)
        for r in range(n):
            class_order = rng.permutation(k)
            order[r * k:(r + 1) * k] = [shuffled[c][r] for c in class_order]
        for start in range(0, n * k, batch_size):
            yield order[start:start + batch_size]
        epoch += 1
