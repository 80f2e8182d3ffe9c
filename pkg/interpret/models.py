from dataclasses import dataclass, field

import numpy as np

METHOD_CHOICES = [
    ('permutation', 'Permutation importance'),
    ('garson', "Garson's algorithm"),
    ('lek', "Lek's profile"),
    ('shapley', 'Shapley value'),
    ('lime', 'LIME'),
]

STABLE = 'stable'
DOWN = 'down'


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    """Per-feature attribution scores produced by one interpretability method

    What a score means depends on `method`: the mean metric after
    permutation, a Garson relative importance, a Shapley value or a LIME
    local coefficient.
    """
    method: str
    feature_names: tuple
    scores: np.ndarray
    replicates: int = 1
    baseline: float = None
    metric: str = ''
    ci_low: np.ndarray = None
    ci_high: np.ndarray = None
    extras: dict = field(default_factory=dict)
    notes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))
        object.__setattr__(self, 'scores', np.asarray(self.scores, dtype=float))
        if self.scores.shape != (len(self.feature_names),):
            raise ValueError("one score per feature is required")

    @property
    def has_intervals(self):
        return self.ci_low is not None and self.ci_high is not None

    @property
    def drops(self):
        """Baseline minus score (permutation importance only)"""
        if self.baseline is None:
            return None
        return self.baseline - self.scores

    def ranking(self):
        """Feature names from most to least important"""
        key = self.drops if self.method == 'permutation' else np.abs(self.scores)
        return [self.feature_names[i] for i in np.argsort(-key, kind='stable')]

    def score_of(self, name):
        return float(self.scores[self.feature_names.index(name)])


@dataclass(frozen=True, eq=False)
class LekProfile:
    feature: str
    grid: np.ndarray
    quantiles: tuple
    probabilities: np.ndarray
    derivatives: np.ndarray

    @property
    def is_flat(self):
        return bool(np.allclose(self.probabilities, self.probabilities[:, :1]))


@dataclass(frozen=True, eq=False)
class LimeExplanation:
    """Weighted least-squares surrogate of a model around one instance"""
    feature_names: tuple
    instance: np.ndarray
    baseline: np.ndarray
    intercept: float
    coefficients: np.ndarray
    selected: tuple
    loss: float
    masks: np.ndarray
    kernel_weights: np.ndarray
    outputs: np.ndarray
    kernel_width: float

    def as_report(self):
        return ImportanceReport(
            method='lime',
            feature_names=self.feature_names,
            scores=self.coefficients,
            baseline=self.intercept,
            extras={'fidelity_loss': self.loss, 'selected': [self.feature_names[j] for j in self.selected]},
        )
