"""Minimal dense-network engine with hand-derived gradients.

Everything is float64 numpy, row-major: inputs are (n_samples, n_features)
matrices, weights are (fan_in, fan_out), biases are (fan_out,) vectors.
Backward passes start from the gradient with respect to the final linear
output (pre-head), which keeps softmax/logistic heads numerically stable:
the loss functions below return that gradient directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RECTIFIER = "rectifier"
IDENTITY = "identity"
SOFTMAX = "softmax"
LOGISTIC = "logistic"

PROB_FLOOR = 1e-12  # clamp applied before any logarithm


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray    # (fan_out,)
    activation: str = RECTIFIER

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class MlpParams:
    """Parameters of one dense network plus its output head."""

    layers: list[Layer]
    head: str = IDENTITY  # softmax | logistic | identity

    def copy(self) -> "MlpParams":
        return MlpParams([l.copy() for l in self.layers], self.head)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def num_parameters(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)


@dataclass
class LayerGrad:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class GradientSet:
    """Per-tensor gradients, shaped exactly like the owning MlpParams."""

    layers: list[LayerGrad] = field(default_factory=list)

    def copy(self) -> "GradientSet":
        return GradientSet([LayerGrad(g.weight.copy(), g.bias.copy()) for g in self.layers])


@dataclass
class ForwardCache:
    """Intermediate activations kept for the backward pass."""

    inputs: np.ndarray
    pre_acts: list[np.ndarray]
    post_acts: list[np.ndarray]


def init_mlp(sizes: list[int], head: str, rng: np.random.Generator,
             activations: list[str] | None = None) -> MlpParams:
    """Create a dense network with scaled-uniform weights and zero biases.

    Weights are drawn uniformly from [-s, s] with s = sqrt(6/(fan_in+fan_out)).
    `sizes` is [input_dim, hidden..., output_dim]; the default activation is
    rectifier everywhere except the last layer, which is identity so heads
    see raw logits.
    """
    n_layers = len(sizes) - 1
    if n_layers < 1:
        raise ValueError("need at least one layer")
    if activations is None:
        activations = [RECTIFIER] * (n_layers - 1) + [IDENTITY]
    layers = []
    for k in range(n_layers):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), activations[k]))
    return MlpParams(layers, head)


def _require_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {name}")


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(params: MlpParams, inputs: np.ndarray) -> tuple[ForwardCache, np.ndarray]:
    """Forward pass; returns the activation cache and the head output.

    Softmax head rows sum to 1; logistic head returns an (n, 1) probability
    column; identity head returns the last layer's activation unchanged.
    """
    a = np.asarray(inputs, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"inputs must be 2-D, got shape {a.shape}")
    if a.shape[1] != params.input_dim:
        raise ValueError(
            f"input width {a.shape[1]} does not match first layer width {params.input_dim}")
    pre_acts, post_acts = [], []
    for layer in params.layers:
        z = a @ layer.weight + layer.bias
        pre_acts.append(z)
        a = np.maximum(z, 0.0) if layer.activation == RECTIFIER else z
        post_acts.append(a)
    if params.head == SOFTMAX:
        out = _softmax_rows(a)
    elif params.head == LOGISTIC:
        out = _sigmoid(a)
    else:
        out = a
    _require_finite(out, "mlp_forward output")
    return ForwardCache(np.asarray(inputs, dtype=float), pre_acts, post_acts), out


def mlp_backward(params: MlpParams, cache: ForwardCache,
                 d_output: np.ndarray) -> tuple[GradientSet, np.ndarray]:
    """Backpropagate d_output (gradient at the final layer's post-activation,
    pre-head) down to parameter gradients and the input gradient."""
    grads: list[LayerGrad] = [None] * len(params.layers)  # type: ignore[list-item]
    d = np.asarray(d_output, dtype=float)
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.activation == RECTIFIER:
            d = d * (cache.pre_acts[k] > 0)
        a_prev = cache.post_acts[k - 1] if k > 0 else cache.inputs
        grads[k] = LayerGrad(a_prev.T @ d, d.sum(axis=0))
        d = d @ layer.weight.T
    return GradientSet(grads), d


def l2_normalize_rows(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit Euclidean norm; zero rows pass through unchanged."""
    x = np.asarray(features, dtype=float)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return x / safe


def l2_normalize_backward(features: np.ndarray, d_normalized: np.ndarray) -> np.ndarray:
    """Gradient of l2_normalize_rows: d_x = (d_y - y (y . d_y)) / ||x||."""
    x = np.asarray(features, dtype=float)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    y = x / safe
    inner = (y * d_normalized).sum(axis=1, keepdims=True)
    return (d_normalized - y * inner) / safe


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus its gradient with respect to logits.

    Assumes `probs` came from a softmax head; the returned gradient is the
    analytic softmax-cross-entropy composite (probs - onehot) / n.
    """
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels)
    n, k = p.shape
    if np.any(y < 0) or np.any(y >= k):
        raise IndexError(f"label out of range for {k} classes")
    picked = p[np.arange(n), y]
    loss = float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
    d_logits = p.copy()
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    _require_finite(d_logits, "cross_entropy gradient")
    return loss, d_logits


def weighted_bce(domain_probs: np.ndarray, targets: np.ndarray,
                 weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted binary cross-entropy over a probability vector.

    loss = mean_i w_i * (-t_i log p_i - (1 - t_i) log(1 - p_i)); the returned
    gradient is with respect to the pre-sigmoid logits, w * (p - t) / n.
    """
    p = np.asarray(domain_probs, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if not (p.shape == t.shape == w.shape):
        raise ValueError("domain_probs, targets and weights must have equal length")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    n = p.size
    pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float((w * (-t * np.log(pc) - (1.0 - t) * np.log(1.0 - pc))).mean())
    d_logits = w * (p - t) / n
    _require_finite(d_logits, "weighted_bce gradient")
    return loss, d_logits


def grl_scale(upstream_grad: GradientSet, lam: float) -> GradientSet:
    """Gradient-reversal scaling: multiply every entry by exactly -lam."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return GradientSet([
        LayerGrad(-lam * g.weight, -lam * g.bias) for g in upstream_grad.layers])


def grads_add(a: GradientSet, b: GradientSet) -> GradientSet:
    """Elementwise sum of two gradient sets of identical shape."""
    if len(a.layers) != len(b.layers):
        raise ValueError("gradient sets have different layer counts")
    return GradientSet([
        LayerGrad(ga.weight + gb.weight, ga.bias + gb.bias)
        for ga, gb in zip(a.layers, b.layers)])


def zero_grads(params: MlpParams) -> GradientSet:
    return GradientSet([
        LayerGrad(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers])


def sgd_step(params: MlpParams, grads: GradientSet, lr: float) -> MlpParams:
    """In-place update theta <- theta - lr * g; returns the same object."""
    if lr <= 0 and lr != 0.0:
        raise ValueError("learning rate must be nonnegative")
    if len(grads.layers) != len(params.layers):
        raise ValueError("gradient set does not match parameter layout")
    for layer, g in zip(params.layers, grads.layers):
        if layer.weight.shape != g.weight.shape or layer.bias.shape != g.bias.shape:
            raise ValueError("gradient shape does not match parameter shape")
        layer.weight -= lr * g.weight
        layer.bias -= lr * g.bias
    return params


def finite_diff_gradient(loss_function, params: MlpParams, h: float = 1e-5) -> GradientSet:
    """Central-difference gradient oracle: (f(theta+h) - f(theta-h)) / (2h).

    `loss_function` maps the (temporarily perturbed) MlpParams to a scalar.
    Entries are perturbed one at a time and restored, so the caller's params
    are unchanged on return.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    grads = zero_grads(params)
    for layer, g in zip(params.layers, grads.layers):
        for tensor, gtensor in ((layer.weight, g.weight), (layer.bias, g.bias)):
            flat = tensor.ravel()
            gflat = gtensor.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                f_plus = loss_function(params)
                flat[i] = orig - h
                f_minus = loss_function(params)
                flat[i] = orig
                gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grads


def max_relative_error(analytic: GradientSet, numeric: GradientSet,
                       floor: float = 1e-4) -> float:
    """Worst per-entry relative disagreement |a - n| / max(|a|, |n|, floor).

    The floor absorbs central-difference round-off on entries that are
    (near-)zero analytically; genuine sign or scale errors on entries of any
    consequence dominate it.
    """
    worst = 0.0
    for ga, gn in zip(analytic.layers, numeric.layers):
        for a, n in ((ga.weight, gn.weight), (ga.bias, gn.bias)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst
