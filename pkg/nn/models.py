import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, softmax

from core.exceptions import ConfigurationError, SchemaError

ACTIVATION_CHOICES = [
    ('sigmoid', 'Sigmoid'),
    ('tanh', 'Hyperbolic tangent'),
    ('elu', 'Exponential Linear Unit'),
    ('relu', 'Rectified Linear Unit'),
    ('selu', 'Scaled Exponential Linear Unit'),
    ('identity', 'Identity (linear network)'),
]

# Default (a, b) per activation; ReLU with a=0 is the plain rectifier.
ACTIVATION_DEFAULTS = {
    'sigmoid': (None, None),
    'tanh': (None, None),
    'elu': (1.0, None),
    'relu': (0.0, None),
    'selu': (1.6733, 1.0507),
    'identity': (None, None),
}

LOSS_CHOICES = [
    ('quadratic', 'Quadratic error'),
    ('cross_entropy', 'Cross-entropy'),
]


@dataclass(frozen=True)
class Activation:
    """Elementwise nonlinearity sigma(u) with its optional parameters a and b"""
    kind: str = 'sigmoid'
    a: float = None
    b: float = None

    def __post_init__(self):
        if self.kind not in ACTIVATION_DEFAULTS:
            raise ConfigurationError(f"unknown activation '{self.kind}'")
        default_a, default_b = ACTIVATION_DEFAULTS[self.kind]
        a = default_a if self.a is None else float(self.a)
        b = default_b if self.b is None else float(self.b)
        for value in (a, b):
            if value is not None and not math.isfinite(value):
                raise ConfigurationError(f"{self.kind} parameters must be finite")
        object.__setattr__(self, 'a', a if default_a is not None else None)
        object.__setattr__(self, 'b', b if default_b is not None else None)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == 'sigmoid':
            return expit(u)
        if self.kind == 'tanh':
            return np.tanh(u)
        if self.kind == 'relu':
            return np.where(u < 0, self.a * u, u)
        if self.kind in ('elu', 'selu'):
            # expm1 on the clipped branch keeps large positive u from overflowing.
            elu = np.where(u < 0, self.a * np.expm1(np.minimum(u, 0.0)), u)
            return self.b * elu if self.kind == 'selu' else elu
        return u

    def derivative(self, u):
        """d sigma / du; at the ReLU kink u = 0 the subgradient 0 is used"""
        u = np.asarray(u, dtype=float)
        if self.kind == 'sigmoid':
            s = expit(u)
            return s * (1.0 - s)
        if self.kind == 'tanh':
            return 1.0 - np.tanh(u) ** 2
        if self.kind == 'relu':
            return np.where(u < 0, self.a, np.where(u > 0, 1.0, 0.0))
        if self.kind in ('elu', 'selu'):
            slope = np.where(u < 0, self.a * np.exp(np.minimum(u, 0.0)), 1.0)
            return self.b * slope if self.kind == 'selu' else slope
        return np.ones_like(u)

    @property
    def is_smooth(self):
        return self.kind in ('sigmoid', 'tanh', 'identity') or (self.kind in ('elu', 'selu') and self.a == 1.0)

    def label(self):
        if self.kind == 'selu':
            return f'SELU(a={self.a:g}, b={self.b:g})'
        if self.kind in ('elu', 'relu'):
            return f'{self.kind.upper()}(a={self.a:g})'
        return dict(ACTIVATION_CHOICES)[self.kind]


@dataclass(frozen=True)
class Architecture:
    hidden: tuple = (3,)
    activation: Activation = field(default_factory=Activation)
    n_classes: int = 2

    def __post_init__(self):
        hidden = tuple(int(size) for size in self.hidden)
        if not hidden:
            raise ConfigurationError("at least one hidden layer is required")
        if any(size < 1 for size in hidden):
            raise ConfigurationError("hidden layers need at least one neuron")
        if self.n_classes < 2:
            raise ConfigurationError("at least two output classes are required")
        object.__setattr__(self, 'hidden', hidden)

    def layer_sizes(self, n_inputs):
        return (int(n_inputs),) + self.hidden + (int(self.n_classes),)


@dataclass(frozen=True)
class TrainConfig:
    loss: str = 'cross_entropy'
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0
    standardize: bool = True

    def __post_init__(self):
        if self.loss not in dict(LOSS_CHOICES):
            raise ConfigurationError(f"unknown loss '{self.loss}'")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning rate must be > 0")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if not self.init_scale > 0:
            raise ConfigurationError("weight-init scale must be > 0")


@dataclass(frozen=True, eq=False)
class NnModel:
    """Feedforward network with a softmax output layer

    `weights[l]` has shape (fan_in + 1, fan_out); row 0 holds the biases
    (alpha_0 / beta_0k), rows 1.. the input weights. Inputs are standardized
    with `input_shift` / `input_scale` before the first layer.
    """
    layer_sizes: tuple
    weights: tuple
    activation: Activation = field(default_factory=Activation)
    feature_names: tuple = ()
    input_shift: np.ndarray = None
    input_scale: np.ndarray = None
    history: tuple = ()

    def __post_init__(self):
        sizes = tuple(int(size) for size in self.layer_sizes)
        if len(sizes) < 3 or any(size < 1 for size in sizes):
            raise ConfigurationError(f"invalid layer sizes {sizes}")
        if len(self.weights) != len(sizes) - 1:
            raise SchemaError("one weight matrix per layer transition is required")
        weights = []
        for index, matrix in enumerate(self.weights):
            matrix = np.array(matrix, dtype=float)
            expected = (sizes[index] + 1, sizes[index + 1])
            if matrix.shape != expected:
                raise SchemaError(f"layer {index + 1} weights have shape {matrix.shape}, expected {expected}")
            matrix.setflags(write=False)
            weights.append(matrix)

        d = sizes[0]
        shift = np.zeros(d) if self.input_shift is None else np.array(self.input_shift, dtype=float)
        scale = np.ones(d) if self.input_scale is None else np.array(self.input_scale, dtype=float)
        if shift.shape != (d,) or scale.shape != (d,) or np.any(scale <= 0):
            raise SchemaError("input standardization must have one positive scale per feature")
        shift.setflags(write=False)
        scale.setflags(write=False)

        names = tuple(self.feature_names) or tuple(f'x{j + 1}' for j in range(d))
        if len(names) != d:
            raise SchemaError("one feature name per input is required")

        object.__setattr__(self, 'layer_sizes', sizes)
        object.__setattr__(self, 'weights', tuple(weights))
        object.__setattr__(self, 'input_shift', shift)
        object.__setattr__(self, 'input_scale', scale)
        object.__setattr__(self, 'feature_names', names)
        object.__setattr__(self, 'history', tuple(float(value) for value in self.history))

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    @property
    def hidden(self):
        return self.layer_sizes[1:-1]

    def standardize(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != self.n_inputs:
            raise SchemaError(f"expected {self.n_inputs} features, got {matrix.shape[1]}")
        return (matrix - self.input_shift) / self.input_scale

    def activations(self, matrix):
        """Pre-activations V and activations Z of every hidden layer, and the output logits T"""
        current = self.standardize(matrix)
        pre, post = [], [current]
        for matrix_l in self.weights[:-1]:
            v = matrix_l[0] + current @ matrix_l[1:]
            current = self.activation(v)
            pre.append(v)
            post.append(current)
        logits = self.weights[-1][0] + current @ self.weights[-1][1:]
        return pre, post, logits

    def forward(self, matrix):
        """Class probabilities g_k(T) = softmax(T), one row per input row"""
        return softmax(self.activations(matrix)[2], axis=1)

    def predict(self, matrix):
        """Probability of the positive class (the last output unit)"""
        return self.forward(matrix)[:, -1]
