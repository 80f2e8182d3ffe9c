import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from core.exceptions import DivergenceError, SchemaError
from core.utils import STREAM_TRAINING, substream

from .models import Activation, NnModel

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class LossResult:
    value: float
    clamped: int = 0


def activation(kind, u, a=None, b=None):
    """sigma(u) for one of sigmoid, tanh, elu, relu, selu, identity"""
    return Activation(kind, a, b)(u)


def _arrays(data, n_classes=2):
    """Return (matrix, one-hot targets) for a Dataset or a (matrix, labels) pair"""
    if isinstance(data, tuple):
        matrix, labels = data
    else:
        matrix, labels = data.values, data.label
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return matrix, labels.astype(float)
    return matrix, one_hot(labels, n_classes)


def one_hot(labels, n_classes=2):
    labels = np.asarray(labels, dtype=int).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise SchemaError(f"labels must lie in 0..{n_classes - 1}")
    targets = np.zeros((labels.size, n_classes))
    targets[np.arange(labels.size), labels] = 1.0
    return targets


def forward(model, x):
    """Class probabilities for one feature vector (or a matrix of rows)"""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n_inputs:
        raise SchemaError(f"expected {model.n_inputs} features, got {x.shape[-1]}")
    probabilities = model.forward(x)
    return probabilities[0] if x.ndim == 1 else probabilities


def cross_entropy(targets, probabilities):
    """-sum y log f, probabilities floored at 1e-12; returns (value, clamped count)"""
    targets = np.asarray(targets, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    clamped = int(np.count_nonzero((probabilities < PROBABILITY_FLOOR) & (targets > 0)))
    value = -float(np.sum(targets * np.log(np.maximum(probabilities, PROBABILITY_FLOOR))))
    return value, clamped


def entropy(targets):
    targets = np.asarray(targets, dtype=float)
    positive = targets > 0
    return -float(np.sum(targets[positive] * np.log(targets[positive])))


def kl_divergence(targets, probabilities):
    """Sum over rows of KL(target row || predicted row)"""
    targets = np.asarray(targets, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    positive = targets > 0
    return float(np.sum(targets[positive] * np.log(targets[positive] / probabilities[positive])))


def loss_details(model, data, kind='cross_entropy'):
    matrix, targets = _arrays(data, model.n_classes)
    probabilities = model.forward(matrix)
    if kind == 'quadratic':
        return LossResult(float(np.sum((targets - probabilities) ** 2)))
    value, clamped = cross_entropy(targets, probabilities)
    if clamped:
        logger.warning(f"Clamped {clamped} predicted probabilities at {PROBABILITY_FLOOR:g}")
    return LossResult(value, clamped)


def loss(model, data, kind='cross_entropy'):
    """Quadratic error or cross-entropy summed over rows and classes"""
    return loss_details(model, data, kind).value


def _backprop(model, matrix, targets, kind, weights=None):
    weights = model.weights if weights is None else weights
    current = model.standardize(matrix)
    pre, post = [], [current]
    for layer in weights[:-1]:
        v = layer[0] + current @ layer[1:]
        current = model.activation(v)
        pre.append(v)
        post.append(current)
    logits = weights[-1][0] + current @ weights[-1][1:]
    probabilities = softmax(logits, axis=1)

    if kind == 'quadratic':
        upstream = 2.0 * (probabilities - targets)
        delta = probabilities * (upstream - np.sum(probabilities * upstream, axis=1, keepdims=True))
    else:
        delta = probabilities * targets.sum(axis=1, keepdims=True) - targets

    gradients = [None] * len(weights)
    for index in range(len(weights) - 1, -1, -1):
        inputs = post[index]
        gradients[index] = np.vstack([delta.sum(axis=0), inputs.T @ delta])
        if index > 0:
            delta = (delta @ weights[index][1:].T) * model.activation.derivative(pre[index - 1])
    return gradients


def gradients(model, data, kind='cross_entropy'):
    """Analytic gradients of `loss` with respect to every weight matrix"""
    matrix, targets = _arrays(data, model.n_classes)
    return tuple(_backprop(model, matrix, targets, kind))


def initialize(arch, n_inputs, config, feature_names=(), input_shift=None, input_scale=None):
    """Uniform(-s, s) weights with s = init_scale / sqrt(fan_in)"""
    generator = substream(config.seed, STREAM_TRAINING, 0)
    sizes = arch.layer_sizes(n_inputs)
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = config.init_scale / np.sqrt(fan_in)
        weights.append(generator.uniform(-bound, bound, size=(fan_in + 1, fan_out)))
    return NnModel(sizes, tuple(weights), arch.activation, feature_names, input_shift, input_scale)


def train(data, arch, config):
    """Mini-batch gradient descent on the mean loss over each batch"""
    matrix, targets = _arrays(data, arch.n_classes)
    n = matrix.shape[0]
    if config.standardize:
        shift = matrix.mean(axis=0)
        scale = matrix.std(axis=0)
        scale[scale == 0.0] = 1.0
    else:
        shift, scale = None, None
    names = getattr(data, 'feature_names', ())
    model = initialize(arch, matrix.shape[1], config, names, shift, scale)
    weights = [layer.copy() for layer in model.weights]
    shuffler = substream(config.seed, STREAM_TRAINING, 1)

    def mean_loss(current):
        snapshot = NnModel(model.layer_sizes, tuple(current), model.activation, model.feature_names,
                           model.input_shift, model.input_scale)
        return loss(snapshot, (matrix, targets), config.loss) / n

    history = [mean_loss(weights)]
    for epoch in range(1, config.epochs + 1):
        order = shuffler.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            steps = _backprop(model, matrix[batch], targets[batch], config.loss, weights)
            for layer, step in zip(weights, steps):
                layer -= config.learning_rate * step / batch.size
        current = mean_loss(weights)
        if not np.isfinite(current):
            raise DivergenceError(epoch)
        history.append(current)

    logger.info(
        f"Trained {model.layer_sizes} {model.activation.kind} network for {config.epochs} epochs: "
        f"{config.loss} {history[0]:.4f} -> {history[-1]:.4f}"
    )
    return NnModel(model.layer_sizes, tuple(weights), model.activation, model.feature_names,
                   model.input_shift, model.input_scale, tuple(history))


def collapse_linear(model):
    """Intercepts (K,) and slopes (d, K) of an identity-activation network on raw inputs"""
    if model.activation.kind != 'identity':
        raise SchemaError("only identity-activation networks collapse to a linear model")
    slopes = np.diag(1.0 / model.input_scale)
    intercepts = -model.input_shift / model.input_scale
    for layer in model.weights:
        intercepts = intercepts @ layer[1:] + layer[0]
        slopes = slopes @ layer[1:]
    return intercepts, slopes


def accuracy(model, data, threshold=0.5):
    return float(np.mean((model.predict(data.values) >= threshold) == (data.label == 1)))
