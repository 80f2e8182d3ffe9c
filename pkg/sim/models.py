import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.exceptions import ConfigurationError, SchemaError

CONTINUOUS = 'continuous'
CATEGORICAL = 'categorical'

DISTRIBUTION_CHOICES = [
    ('binomial', 'Binomial(p, size)'),
    ('exponential', 'Exponential(rate)'),
    ('poisson', 'Poisson(lam)'),
    ('normal', 'Normal(mu, sd)'),
]

REQUIRED_PARAMETERS = {
    'binomial': ('p', 'size'),
    'exponential': ('rate',),
    'poisson': ('lam',),
    'normal': ('mu', 'sd'),
}


@dataclass(frozen=True)
class DistributionSpec:
    """Marginal distribution of one simulated risk factor"""
    kind: str
    params: dict = field(default_factory=dict)

    def validate(self, name=''):
        if self.kind not in REQUIRED_PARAMETERS:
            raise ConfigurationError(f"{name}: unknown distribution '{self.kind}'")
        missing = [key for key in REQUIRED_PARAMETERS[self.kind] if key not in self.params]
        if missing:
            raise ConfigurationError(f"{name}: {self.kind} needs parameters {', '.join(missing)}")
        values = {key: float(value) for key, value in self.params.items()}
        if not all(math.isfinite(value) for value in values.values()):
            raise ConfigurationError(f"{name}: distribution parameters must be finite")

        if self.kind == 'binomial':
            if not 0.0 <= values['p'] <= 1.0:
                raise ConfigurationError(f"{name}: binomial probability must be in [0, 1]")
            if values['size'] < 1 or values['size'] != int(values['size']):
                raise ConfigurationError(f"{name}: binomial size must be a positive integer")
        elif self.kind == 'exponential' and values['rate'] <= 0:
            raise ConfigurationError(f"{name}: exponential rate must be > 0")
        elif self.kind == 'poisson' and values['lam'] <= 0:
            raise ConfigurationError(f"{name}: Poisson rate must be > 0")
        elif self.kind == 'normal' and values['sd'] < 0:
            raise ConfigurationError(f"{name}: normal sd must be >= 0")

    @property
    def is_categorical(self):
        return self.kind == 'binomial'

    @property
    def levels(self):
        if self.kind == 'binomial':
            return tuple(range(int(self.params['size']) + 1))
        return ()

    def sample(self, generator, n):
        p = self.params
        if self.kind == 'binomial':
            return generator.binomial(int(p['size']), float(p['p']), size=n).astype(float)
        if self.kind == 'exponential':
            return generator.exponential(1.0 / float(p['rate']), size=n)
        if self.kind == 'poisson':
            return generator.poisson(float(p['lam']), size=n).astype(float)
        return generator.normal(float(p['mu']), float(p['sd']), size=n)


# Relevant factors X act on the outcome through a, irrelevant factors Z through b.
DEFAULT_X_DISTRIBUTIONS = (
    DistributionSpec('binomial', {'p': 0.3, 'size': 3}),
    DistributionSpec('exponential', {'rate': 1.0}),
    DistributionSpec('poisson', {'lam': 3.0}),
)
DEFAULT_Z_DISTRIBUTIONS = (
    DistributionSpec('binomial', {'p': 0.5, 'size': 2}),
    DistributionSpec('normal', {'mu': 3.0, 'sd': 1.0}),
    DistributionSpec('poisson', {'lam': 5.0}),
)
FEATURE_NAMES = ('X1', 'X2', 'X3', 'Z1', 'Z2', 'Z3')


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the logistic data-generating process"""
    n: int = 1000
    a: tuple = (1.0, 2.0, -1.0)
    b: tuple = (0.0, 0.0, 0.0)
    intercept: float = 0.0
    noise_sd: float = 0.1
    noise_is_variance: bool = False
    seed: int = 0
    x_distributions: tuple = DEFAULT_X_DISTRIBUTIONS
    z_distributions: tuple = DEFAULT_Z_DISTRIBUTIONS

    def validate(self):
        if int(self.n) < 1:
            raise ConfigurationError("n must be >= 1")
        if len(self.a) != len(self.x_distributions) or len(self.b) != len(self.z_distributions):
            raise ConfigurationError("one coefficient is required per simulated feature")
        if not math.isfinite(self.noise_sd) or self.noise_sd < 0:
            raise ConfigurationError("noise_sd must be >= 0")
        for name, spec in zip(self.feature_names, self.distributions):
            spec.validate(name)
        return self

    @property
    def distributions(self):
        return tuple(self.x_distributions) + tuple(self.z_distributions)

    @property
    def coefficients(self):
        return np.array(tuple(self.a) + tuple(self.b), dtype=float)

    @property
    def feature_names(self):
        n_x, n_z = len(self.x_distributions), len(self.z_distributions)
        if (n_x, n_z) == (3, 3):
            return FEATURE_NAMES
        return tuple(f'X{i + 1}' for i in range(n_x)) + tuple(f'Z{i + 1}' for i in range(n_z))

    @property
    def noise_scale(self):
        """Standard deviation of the logit noise"""
        return math.sqrt(self.noise_sd) if self.noise_is_variance else float(self.noise_sd)

    def with_intercept(self, intercept):
        return replace(self, intercept=float(intercept))


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = CONTINUOUS
    levels: tuple = ()

    @property
    def is_categorical(self):
        return self.kind == CATEGORICAL


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix, per-column metadata and a binary label vector

    Arrays are made read-only on construction, so a dataset can be shared
    between threads once built.
    """
    values: np.ndarray
    columns: tuple
    label: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise SchemaError("feature matrix must be two-dimensional")
        label = np.asarray(self.label).astype(np.int8).ravel()
        if label.shape[0] != values.shape[0]:
            raise SchemaError("label length does not match the number of rows")
        if len(self.columns) != values.shape[1]:
            raise SchemaError("column metadata count does not match the matrix width")
        if not np.all(np.isin(self.label, (0, 1))):
            raise SchemaError("labels must be 0 or 1")
        if np.isnan(values).any():
            raise SchemaError("feature matrix contains missing values")
        values.setflags(write=False)
        label.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'label', label)
        object.__setattr__(self, 'columns', tuple(self.columns))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    @property
    def feature_names(self):
        return tuple(column.name for column in self.columns)

    @property
    def positives(self):
        return int(self.label.sum())

    @property
    def negatives(self):
        return self.n_rows - self.positives

    @property
    def positive_rate(self):
        return self.positives / self.n_rows if self.n_rows else 0.0

    def column_index(self, name_or_index):
        if isinstance(name_or_index, (int, np.integer)):
            index = int(name_or_index)
            if not 0 <= index < self.n_features:
                raise SchemaError(f"feature index {index} out of range")
            return index
        try:
            return self.feature_names.index(name_or_index)
        except ValueError:
            raise SchemaError(f"unknown feature '{name_or_index}'") from None

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.values[rows], self.columns, self.label[rows], dict(self.provenance))

    def with_values(self, values):
        return Dataset(values, self.columns, self.label, dict(self.provenance))

    def with_column(self, index, column_values):
        values = self.values.copy()
        values[:, index] = column_values
        return self.with_values(values)

    def same_schema(self, other):
        return self.feature_names == tuple(other)
