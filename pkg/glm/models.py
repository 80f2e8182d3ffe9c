import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

from core.exceptions import ConfigurationError, InferenceUnavailableError, SchemaError

# Two-sided 95 % normal quantile as used for every Wald interval in reports.
Z_95 = 1.96

PENALTY_CHOICES = [
    ('none', 'No penalty'),
    ('ridge', 'Ridge (L2)'),
    ('lasso', 'Lasso (L1)'),
]


@dataclass(frozen=True)
class PenaltySpec:
    kind: str = 'none'
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in dict(PENALTY_CHOICES):
            raise ConfigurationError(f"unknown penalty '{self.kind}'")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ConfigurationError("penalty weight lambda must be >= 0")

    @property
    def is_penalized(self):
        return self.kind != 'none'

    def __str__(self):
        return 'none' if not self.is_penalized else f'{self.kind}({self.lam:g})'


@dataclass(frozen=True)
class OddsRatioRow:
    feature: str
    odds_ratio: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True, eq=False)
class GlmFit:
    """Fitted logistic regression

    `coefficients[0]` is the intercept. `covariance` is None for penalized
    fits, which makes every Wald quantity unavailable.
    """
    feature_names: tuple
    coefficients: np.ndarray
    covariance: np.ndarray = None
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    iterations: int = 0
    converged: bool = True
    deviance: float = float('nan')
    null_deviance: float = float('nan')
    n_obs: int = 0
    deviance_trace: tuple = ()
    warnings: tuple = ()

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float)
        if coefficients.shape != (len(self.feature_names) + 1,):
            raise SchemaError("one intercept plus one coefficient per feature is required")
        coefficients.setflags(write=False)
        object.__setattr__(self, 'coefficients', coefficients)
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        if self.covariance is not None:
            covariance = np.array(self.covariance, dtype=float)
            covariance.setflags(write=False)
            object.__setattr__(self, 'covariance', covariance)

    @property
    def intercept(self):
        return float(self.coefficients[0])

    @property
    def slopes(self):
        return self.coefficients[1:]

    @property
    def inference_available(self):
        return self.covariance is not None and not self.penalty.is_penalized

    @property
    def separated(self):
        return any('separation' in message for message in self.warnings)

    def _require_inference(self):
        if not self.inference_available:
            raise InferenceUnavailableError(f"Wald inference is unavailable for a penalized fit ({self.penalty})")

    @property
    def standard_errors(self):
        self._require_inference()
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def z_values(self):
        return self.coefficients / self.standard_errors

    @property
    def p_values(self):
        return 2.0 * stats.norm.sf(np.abs(self.z_values))

    def confidence_intervals(self):
        se = self.standard_errors
        return np.column_stack([self.coefficients - Z_95 * se, self.coefficients + Z_95 * se])

    @property
    def log_likelihood(self):
        return -0.5 * self.deviance

    @property
    def aic(self):
        return self.deviance + 2 * self.coefficients.size

    @property
    def bic(self):
        return self.deviance + math.log(max(self.n_obs, 1)) * self.coefficients.size

    def linear_predictor(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != len(self.feature_names):
            raise SchemaError(f"expected {len(self.feature_names)} features, got {matrix.shape[1]}")
        return self.coefficients[0] + matrix @ self.coefficients[1:]

    def predict(self, matrix):
        """Probability of the positive class for each row"""
        return expit(self.linear_predictor(matrix))

    def odds_ratios(self):
        self._require_inference()
        se = self.standard_errors
        return [
            OddsRatioRow(
                feature=name,
                odds_ratio=math.exp(theta),
                ci_low=math.exp(theta - Z_95 * s),
                ci_high=math.exp(theta + Z_95 * s),
            )
            for name, theta, s in zip(self.feature_names, self.coefficients[1:], se[1:])
        ]

    def coefficient_rows(self):
        """Rows of (term, estimate, se, z, p) for reports; inference columns are None when unavailable"""
        terms = ('(intercept)',) + self.feature_names
        if not self.inference_available:
            return [(term, float(theta), None, None, None) for term, theta in zip(terms, self.coefficients)]
        return [
            (term, float(theta), float(se), float(z), float(p))
            for term, theta, se, z, p in zip(
                terms, self.coefficients, self.standard_errors, self.z_values, self.p_values
            )
        ]
