"""Small feed-forward network for the title verdict.

384-dim embedding in, two class probabilities out, through two rectified
hidden layers and a softmax.  Trained with mini-batch gradient descent
plus momentum on the cross-entropy; everything is plain numpy so training
is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, SingleClassData
from .types import BinaryLabel

INPUT_DIM = 384
N_CLASSES = 2
DEFAULT_HIDDEN = (128, 32)

#: Class order of the output layer.
CLASS_ORDER = (BinaryLabel.BENIGN, BinaryLabel.PGDN)
PGDN_INDEX = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    split_fraction: float = 0.8
    level2_backend: str = "forest"
    hidden_sizes: tuple[int, int] = DEFAULT_HIDDEN

    def __post_init__(self) -> None:
        if not 0 < self.split_fraction < 1:
            raise ValueError("split_fraction must be in (0, 1)")
        for name in ("learning_rate", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.momentum < 0:
            raise ValueError("momentum must be >= 0")
        if self.level2_backend not in ("forest", "tree", "linear_svm"):
            raise ValueError(f"unknown level2 backend: {self.level2_backend!r}")
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))


@dataclass
class MlpParams:
    """Weights and biases; weights[i] maps layer i to layer i+1."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    @classmethod
    def init(cls, hidden_sizes: tuple[int, int], rng: np.random.Generator,
             input_dim: int = INPUT_DIM) -> "MlpParams":
        sizes = (input_dim, *hidden_sizes, N_CLASSES)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)  # He init for rectifier nets
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            # small random bias keeps pre-activations off the exact ReLU
            # kink, where finite differences disagree with backprop
            biases.append(rng.normal(0.0, 0.01, size=fan_out))
        return cls(weights, biases)


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    want = params.weights[0].shape[0]
    if x.shape[-1] != want:
        raise ShapeMismatch(f"input width {x.shape[-1]}, model expects {want}")
    return x


def _forward_batch(params: MlpParams, x: np.ndarray) -> list[np.ndarray]:
    """Return per-layer activations; the last entry holds the logits."""
    activations = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        activations.append(h)
    return activations


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one embedding; sums to 1 within 1e-9."""
    x = _check_input(params, x)
    logits = _forward_batch(params, x[None, :])[-1]
    return _softmax(logits)[0]


def mlp_forward_batch(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = _check_input(params, x)
    return _softmax(_forward_batch(params, x)[-1])


def cross_entropy_loss(params: MlpParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood of integer class targets."""
    x = _check_input(params, x)
    logits = _forward_batch(params, x)[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(y)), y].mean())


def mlp_gradients(
    params: MlpParams, x: np.ndarray, y: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backprop gradients of the mean cross-entropy."""
    x = _check_input(params, x)
    n = len(y)
    activations = _forward_batch(params, x)
    probs = _softmax(activations[-1])
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [np.empty(0)] * len(params.weights)
    grad_b = [np.empty(0)] * len(params.biases)
    for i in reversed(range(len(params.weights))):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            delta[activations[i] <= 0.0] = 0.0
    return grad_w, grad_b


def labels_to_indices(labels) -> np.ndarray:
    return np.array([CLASS_ORDER.index(lab) for lab in labels], dtype=np.int64)


def mlp_train(
    data: list[tuple[np.ndarray, BinaryLabel]],
    cfg: TrainConfig,
) -> MlpParams:
    """Mini-batch gradient descent with momentum on the cross-entropy.

    Deterministic for a fixed cfg.seed; raises SingleClassData when the
    labels are all one class.
    """
    if not data:
        raise SingleClassData("no training data")
    x = np.stack([vec for vec, _ in data]).astype(np.float64)
    y = labels_to_indices([lab for _, lab in data])
    if len(set(y.tolist())) < 2:
        raise SingleClassData("training data holds a single class")

    rng = np.random.default_rng(cfg.seed)
    params = MlpParams.init(cfg.hidden_sizes, rng, input_dim=x.shape[1])
    velocity_w = [np.zeros_like(w) for w in params.weights]
    velocity_b = [np.zeros_like(b) for b in params.biases]

    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grad_w, grad_b = mlp_gradients(params, x[batch], y[batch])
            for i in range(len(params.weights)):
                velocity_w[i] = cfg.momentum * velocity_w[i] - cfg.learning_rate * grad_w[i]
                velocity_b[i] = cfg.momentum * velocity_b[i] - cfg.learning_rate * grad_b[i]
                params.weights[i] += velocity_w[i]
                params.biases[i] += velocity_b[i]

    if not all(np.isfinite(w).all() for w in params.weights):
        raise ArithmeticError("training diverged to non-finite weights")
    return params


def min_preactivation_gap(params: MlpParams, x: np.ndarray) -> float:
    """Smallest |pre-activation| over the hidden layers.

    Central differences are only meaningful away from the rectifier kink;
    gradient checks should redraw inputs until this gap is comfortable.
    """
    x = _check_input(params, np.atleast_2d(x))
    gap = np.inf
    h = x
    for i, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        z = h @ w + b
        gap = min(gap, float(np.abs(z).min()))
        h = np.maximum(z, 0.0)
    return gap


def relative_gradient_error(
    params: MlpParams,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Worst relative disagreement between backprop and central differences.

    The floor keeps finite-difference cancellation noise on near-zero
    gradients from masquerading as error.
    """
    got_w, got_b = mlp_gradients(params, x, y)
    num_w, num_b = numerical_gradients(params, x, y, step)
    worst = 0.0
    for g, n in zip(got_w + got_b, num_w + num_b):
        denom = np.maximum(np.abs(g) + np.abs(n), floor)
        worst = max(worst, float((np.abs(g - n) / denom).max()))
    return worst


def numerical_gradients(
    params: MlpParams, x: np.ndarray, y: np.ndarray, step: float = 1e-5
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Central finite differences of the loss, one parameter at a time.

    Slow by construction; exists for gradient verification only.
    """
    work = params.copy()

    def loss() -> float:
        return cross_entropy_loss(work, x, y)

    num_w = []
    for w in work.weights:
        grad = np.zeros_like(w)
        flat = w.ravel()
        g = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            g[i] = (up - down) / (2 * step)
        num_w.append(grad)
    num_b = []
    for b in work.biases:
        grad = np.zeros_like(b)
        for i in range(b.size):
            orig = b[i]
            b[i] = orig + step
            up = loss()
            b[i] = orig - step
            down = loss()
            b[i] = orig
            grad[i] = (up - down) / (2 * step)
        num_b.append(grad)
    return num_w, num_b
