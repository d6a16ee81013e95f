"""Weighted adversarial training loop plus the comparison baselines.

Four modes share one loop: "suan" (register-driven class weights on the
source side, confidence weights on the target side), "source_only" (no
alignment), "unweighted_adversarial" (all weights one), and "uan_weighting"
(sample-wise entropy/domain-confidence weights from an auxiliary
non-adversarial domain classifier).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mlp import (IDENTITY, LOGISTIC, PROB_FLOOR, RECTIFIER, SOFTMAX, GradientSet,
                  MlpParams, cross_entropy, grads_add, grl_scale, init_mlp,
                  l2_normalize_backward, l2_normalize_rows, mlp_backward, mlp_forward,
                  sgd_step, weighted_bce)
from .scenario import Dataset, LabelSets, balanced_batches, jaccard_index
from .weighting import (MarginRegister, NormalizationConfig, WeightBatch,
                        batch_margin_vector, normalize_weights, source_weights,
                        target_weights, tmr_update)

MODES = ("suan", "source_only", "unweighted_adversarial", "uan_weighting")

# w0 defaults to 1 when the label-set overlap is at least this large
W0_OVERLAP_CUTOVER = 0.3


@dataclass
class AdaptationModel:
    """Feature extractor + label classifier + adversarial domain classifier,
    with an optional auxiliary (non-adversarial) domain classifier used only
    by the uan_weighting baseline."""

    feature_extractor: MlpParams
    classifier: MlpParams
    domain_classifier: MlpParams
    aux_domain_classifier: MlpParams | None = None

    def __post_init__(self) -> None:
        feat_dim = self.feature_extractor.output_dim
        if self.classifier.input_dim != feat_dim:
            raise ValueError("classifier input width must match feature width")
        if self.domain_classifier.input_dim != feat_dim:
            raise ValueError("domain classifier input width must match feature width")

    @property
    def num_classes(self) -> int:
        return self.classifier.output_dim

    def copy(self) -> "AdaptationModel":
        return AdaptationModel(
            self.feature_extractor.copy(), self.classifier.copy(),
            self.domain_classifier.copy(),
            None if self.aux_domain_classifier is None else self.aux_domain_classifier.copy())


@dataclass
class TrainConfig:
    max_steps: int = 2000
    epsilon: float = 0.1           # source-error gate threshold
    learning_rate: float = 0.2
    batch_size: int = 36           # per-domain samples per step
    w0: int | None = None          # None: 1 if label overlap >= 0.3 else 0
    grl_lambda: float = 1.0
    grl_ramp: bool = False         # linear 0 -> grl_lambda over the run
    mode: str = "suan"
    seed: int = 0
    exact_source_error: bool = False  # gate on the full source set each step
    feature_widths: tuple[int, ...] = (32, 16)
    domain_hidden: int = 8
    snapshot_every: int = 100

    def validate(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.w0 not in (None, 0, 1):
            raise ValueError("w0 must be 0 or 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.grl_lambda < 0:
            raise ValueError("grl_lambda must be nonnegative")


@dataclass
class StepRecord:
    step: int
    e_g: float
    e_d: float
    source_error: float
    gate_open: bool
    ws_common_mean: float
    ws_private_mean: float
    wt_common_mean: float
    wt_private_mean: float


@dataclass
class TrainTrace:
    records: list[StepRecord] = field(default_factory=list)
    register_snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)


def build_model(feature_dim: int, num_classes: int, rng: np.random.Generator,
                feature_widths: tuple[int, ...] = (32, 16), domain_hidden: int = 8,
                with_aux_domain: bool = False) -> AdaptationModel:
    """Instantiate the three (or four) networks with scaled-uniform init."""
    f = init_mlp([feature_dim, *feature_widths], IDENTITY, rng,
                 activations=[RECTIFIER] * len(feature_widths))
    g = init_mlp([feature_widths[-1], num_classes], SOFTMAX, rng)
    d = init_mlp([feature_widths[-1], domain_hidden, 1], LOGISTIC, rng)
    aux = None
    if with_aux_domain:
        aux = init_mlp([feature_widths[-1], domain_hidden, 1], LOGISTIC, rng)
    return AdaptationModel(f, g, d, aux)


def extract_features(model: AdaptationModel, inputs: np.ndarray) -> np.ndarray:
    _, feats = mlp_forward(model.feature_extractor, inputs)
    return feats


def classify(model: AdaptationModel, inputs: np.ndarray) -> np.ndarray:
    """Class probabilities of the softmax classifier over normalized features."""
    feats = extract_features(model, inputs)
    _, probs = mlp_forward(model.classifier, l2_normalize_rows(feats))
    return probs


def classifier_objective(model: AdaptationModel, inputs: np.ndarray,
                         labels: np.ndarray) -> tuple[float, GradientSet, GradientSet]:
    """Mean cross-entropy of the classifier head and its gradients for the
    feature extractor and the classifier."""
    f_cache, feats = mlp_forward(model.feature_extractor, inputs)
    normed = l2_normalize_rows(feats)
    g_cache, probs = mlp_forward(model.classifier, normed)
    loss, d_logits = cross_entropy(probs, labels)
    g_grads, d_normed = mlp_backward(model.classifier, g_cache, d_logits)
    d_feats = l2_normalize_backward(feats, d_normed)
    f_grads, _ = mlp_backward(model.feature_extractor, f_cache, d_feats)
    return loss, f_grads, g_grads


def domain_objective(model: AdaptationModel, source_inputs: np.ndarray,
                     target_inputs: np.ndarray, w_s: WeightBatch, w_t: WeightBatch,
                     grl_lambda: float | None = None,
                     ) -> tuple[float, GradientSet, GradientSet]:
    """Weighted domain-discrimination loss and its gradients.

    The loss is the weighted mean BCE over the source batch (domain target 1)
    plus the weighted mean BCE over the target batch (domain target 0).
    Returns (loss, domain classifier grads, feature extractor grads). The
    domain classifier gets its plain descent gradient. With grl_lambda=None
    the feature gradient is returned ungated; otherwise it is routed through
    the gradient reversal, i.e. multiplied by exactly -grl_lambda.
    """
    if np.any(w_s.values < 0) or np.any(w_t.values < 0):
        raise ValueError("domain weights must be nonnegative")
    fs_cache, zs = mlp_forward(model.feature_extractor, source_inputs)
    ft_cache, zt = mlp_forward(model.feature_extractor, target_inputs)
    # the domain classifier judges the same normalized features the label
    # classifier sees, so fooling it requires moving feature directions
    ns, nt = l2_normalize_rows(zs), l2_normalize_rows(zt)
    ds_cache, ps = mlp_forward(model.domain_classifier, ns)
    dt_cache, pt = mlp_forward(model.domain_classifier, nt)
    loss_s, dlog_s = weighted_bce(ps[:, 0], np.ones(len(ps)), w_s.values)
    loss_t, dlog_t = weighted_bce(pt[:, 0], np.zeros(len(pt)), w_t.values)
    d_grads_s, d_ns = mlp_backward(model.domain_classifier, ds_cache, dlog_s[:, None])
    d_grads_t, d_nt = mlp_backward(model.domain_classifier, dt_cache, dlog_t[:, None])
    f_grads_s, _ = mlp_backward(model.feature_extractor, fs_cache,
                                l2_normalize_backward(zs, d_ns))
    f_grads_t, _ = mlp_backward(model.feature_extractor, ft_cache,
                                l2_normalize_backward(zt, d_nt))
    d_grads = grads_add(d_grads_s, d_grads_t)
    f_grads = grads_add(f_grads_s, f_grads_t)
    if grl_lambda is not None:
        f_grads = grl_scale(f_grads, grl_lambda)
    return loss_s + loss_t, d_grads, f_grads


def source_error(model: AdaptationModel, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples whose argmax prediction differs from the label."""
    if len(inputs) == 0:
        raise ValueError("cannot compute source error on empty data")
    pred = classify(model, inputs).argmax(axis=1)
    return float((pred != np.asarray(labels)).mean())


def prediction_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy per row, in nats."""
    p = np.clip(np.asarray(probs, dtype=float), PROB_FLOOR, 1.0)
    return -(p * np.log(p)).sum(axis=1)


def uan_weights(model: AdaptationModel, source_inputs: np.ndarray,
                target_inputs: np.ndarray) -> tuple[WeightBatch, WeightBatch]:
    """Sample-wise baseline weights from prediction entropy and the auxiliary
    domain classifier: w_s = H/log(k) - d_aux, w_t = d_aux - H/log(k).

    Raw values lie in [-1, 1]; callers normalize them before use.
    """
    if model.aux_domain_classifier is None:
        raise ValueError("uan weighting requires the auxiliary domain classifier")
    log_k = np.log(model.num_classes)
    ns = l2_normalize_rows(extract_features(model, source_inputs))
    nt = l2_normalize_rows(extract_features(model, target_inputs))
    _, probs_s = mlp_forward(model.classifier, ns)
    _, probs_t = mlp_forward(model.classifier, nt)
    _, aux_s = mlp_forward(model.aux_domain_classifier, ns)
    _, aux_t = mlp_forward(model.aux_domain_classifier, nt)
    hs = prediction_entropy(probs_s) / log_k
    ht = prediction_entropy(probs_t) / log_k
    return (WeightBatch(hs - aux_s[:, 0], "source"),
            WeightBatch(aux_t[:, 0] - ht, "target"))


def _aux_domain_step(model: AdaptationModel, source_inputs: np.ndarray,
                     target_inputs: np.ndarray, lr: float) -> None:
    """One plain BCE step for the auxiliary domain classifier; gradients stop
    at the features, so it never influences the extractor."""
    ns = l2_normalize_rows(extract_features(model, source_inputs))
    nt = l2_normalize_rows(extract_features(model, target_inputs))
    aux = model.aux_domain_classifier
    cs, ps = mlp_forward(aux, ns)
    ct, pt = mlp_forward(aux, nt)
    _, dlog_s = weighted_bce(ps[:, 0], np.ones(len(ps)), np.ones(len(ps)))
    _, dlog_t = weighted_bce(pt[:, 0], np.zeros(len(pt)), np.ones(len(pt)))
    gs, _ = mlp_backward(aux, cs, dlog_s[:, None])
    gt, _ = mlp_backward(aux, ct, dlog_t[:, None])
    sgd_step(aux, grads_add(gs, gt), lr)


@dataclass
class GateState:
    """Exponential moving average of the per-batch source error (decay 0.9)."""

    ema_error: float | None = None

    def update(self, batch_error: float) -> float:
        if self.ema_error is None:
            self.ema_error = batch_error
        else:
            self.ema_error = 0.9 * self.ema_error + 0.1 * batch_error
        return self.ema_error


def resolve_w0(config: TrainConfig, label_sets: LabelSets) -> int:
    """Explicit w0 wins; otherwise 1 for large label overlap, else 0."""
    if config.w0 is not None:
        return config.w0
    return 1 if jaccard_index(label_sets) >= W0_OVERLAP_CUTOVER else 0


def _grl_lambda_at(config: TrainConfig, step: int) -> float:
    if not config.grl_ramp or config.max_steps <= 1:
        return config.grl_lambda
    return config.grl_lambda * step / (config.max_steps - 1)


def _group_mean(values: np.ndarray, mask: np.ndarray) -> float:
    return float(values[mask].mean()) if mask.any() else float("nan")


def train_step(model: AdaptationModel, register: MarginRegister,
               source_batch: tuple[np.ndarray, np.ndarray],
               target_batch: tuple[np.ndarray, np.ndarray],
               config: TrainConfig, step: int = 0,
               gate_state: GateState | None = None,
               gate_data: tuple[np.ndarray, np.ndarray] | None = None,
               label_sets: LabelSets | None = None,
               ) -> tuple[AdaptationModel, MarginRegister, StepRecord]:
    """One optimization step; returns the (mutated) model, the possibly
    updated register, and the trace record.

    target_batch carries true labels purely for the trace's per-group weight
    statistics; no training decision reads them. gate_data supplies the full
    source set when exact_source_error is on.
    """
    xs, ys = source_batch
    xt, yt = target_batch
    if len(xs) == 0 or len(xt) == 0:
        raise ValueError("batches must be nonempty")
    lr = config.learning_rate
    w0 = config.w0 if config.w0 is not None else 0

    # classification term (all modes)
    e_g, f_grads, g_grads = classifier_objective(model, xs, ys)

    # gate statistic: full-set error in exact mode, EMA of batch errors otherwise
    if config.exact_source_error and gate_data is not None:
        err = source_error(model, gate_data[0], gate_data[1])
    else:
        err = source_error(model, xs, ys)
        if gate_state is not None:
            err = gate_state.update(err)

    e_d = 0.0
    gate_open = False
    ws_n = wt_n = None
    if config.mode == "source_only":
        sgd_step(model.feature_extractor, f_grads, lr)
        sgd_step(model.classifier, g_grads, lr)
    else:
        if config.mode == "suan":
            probs_t = classify(model, xt)
            margins = batch_margin_vector(probs_t, register.num_classes)
            gate_open = err < config.epsilon
            if gate_open:
                register = tmr_update(register, margins)
            ws_n = normalize_weights(source_weights(register, ys), NormalizationConfig(w0))
            wt_n = normalize_weights(target_weights(probs_t), NormalizationConfig(w0))
        elif config.mode == "unweighted_adversarial":
            ws_n = WeightBatch(np.ones(len(xs)), "source")
            wt_n = WeightBatch(np.ones(len(xt)), "target")
        else:  # uan_weighting
            _aux_domain_step(model, xs, xt, lr)
            ws_raw, wt_raw = uan_weights(model, xs, xt)
            ws_n = normalize_weights(ws_raw, NormalizationConfig(w0))
            wt_n = normalize_weights(wt_raw, NormalizationConfig(w0))
        if ws_n.values.sum() == 0.0 or wt_n.values.sum() == 0.0:
            # a fully zero-weighted half (e.g. the all-zero register under
            # w0=1) makes the discriminator problem one-sided; skip the
            # domain step rather than train against an arbitrary boundary
            e_d = 0.0
            sgd_step(model.feature_extractor, f_grads, lr)
            sgd_step(model.classifier, g_grads, lr)
        else:
            lam = _grl_lambda_at(config, step)
            e_d, d_grads, f_adv = domain_objective(model, xs, xt, ws_n, wt_n,
                                                   grl_lambda=lam)
            sgd_step(model.feature_extractor, grads_add(f_grads, f_adv), lr)
            sgd_step(model.classifier, g_grads, lr)
            sgd_step(model.domain_classifier, d_grads, lr)

    record = StepRecord(
        step=step, e_g=e_g, e_d=e_d, source_error=err, gate_open=gate_open,
        ws_common_mean=float("nan"), ws_private_mean=float("nan"),
        wt_common_mean=float("nan"), wt_private_mean=float("nan"))
    if label_sets is not None and ws_n is not None:
        common = np.asarray([c in set(label_sets.common) for c in ys])
        t_common = np.asarray([c in set(label_sets.common) for c in yt])
        record.ws_common_mean = _group_mean(ws_n.values, common)
        record.ws_private_mean = _group_mean(ws_n.values, ~common)
        record.wt_common_mean = _group_mean(wt_n.values, t_common)
        record.wt_private_mean = _group_mean(wt_n.values, ~t_common)
    return model, register, record


def fit(source: Dataset, target: Dataset, config: TrainConfig,
        ) -> tuple[AdaptationModel, MarginRegister, TrainTrace]:
    """Run the full training loop over repeating balanced batches."""
    config.validate()
    label_sets = source.label_sets
    num_classes = len(label_sets.source_classes)
    rng = np.random.default_rng(config.seed)
    model = build_model(source.features.shape[1], num_classes, rng,
                        config.feature_widths, config.domain_hidden,
                        with_aux_domain=config.mode == "uan_weighting")
    register = MarginRegister(num_classes)
    trace = TrainTrace()
    cfg = config if config.w0 is not None else replace(config, w0=resolve_w0(config, label_sets))
    src_stream = balanced_batches(source, config.batch_size, rng, epochs=None)
    tgt_stream = balanced_batches(target, config.batch_size, rng, epochs=None)
    gate_state = GateState()
    gate_data = (source.features, source.labels) if config.exact_source_error else None
    for step in range(config.max_steps):
        si = next(src_stream)
        ti = next(tgt_stream)
        model, register, record = train_step(
            model, register,
            (source.features[si], source.labels[si]),
            (target.features[ti], target.labels[ti]),
            cfg, step, gate_state, gate_data, label_sets)
        trace.records.append(record)
        if step % config.snapshot_every == 0 or step == config.max_steps - 1:
            trace.register_snapshots.append((step, register.vector.copy()))
    return model, register, trace
