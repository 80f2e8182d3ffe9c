from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ConfigurationError

DUPLICATION_CHOICES = [
    ('off', 'No duplication'),
    ('before_split', 'Duplicate the minority class before splitting'),
    ('train_only', 'Duplicate the minority class in the training part only'),
]

CI_CHOICES = [
    ('normal', 'mean +/- 1.96 sd / sqrt(N)'),
    ('percentile', 'Empirical 2.5 % and 97.5 % percentiles'),
]

METRIC_CHOICES = [
    ('p_d', 'Correct prediction among diseased (sensitivity)'),
    ('p_nd', 'Correct prediction among non-diseased (specificity)'),
    ('p_g', 'Global correct prediction (accuracy)'),
]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 2 / 3
    replicates: int = 100
    seed: int = 0
    duplication: str = 'before_split'
    threshold: float = 0.5
    ci: str = 'normal'

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train fraction must be in (0, 1)")
        if self.replicates < 1:
            raise ConfigurationError("at least one replicate is required")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigurationError("threshold must be in (0, 1)")
        if self.duplication not in dict(DUPLICATION_CHOICES):
            raise ConfigurationError(f"unknown duplication mode '{self.duplication}'")
        if self.ci not in dict(CI_CHOICES):
            raise ConfigurationError(f"unknown confidence interval '{self.ci}'")


@dataclass(frozen=True)
class ReplicateCounts:
    """The four counts of one method on one test partition"""
    replicate: int
    method: str
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.tn + self.fp

    @property
    def total(self):
        return self.positives + self.negatives

    @property
    def p_d(self):
        return self.tp / self.positives if self.positives else None

    @property
    def p_nd(self):
        return self.tn / self.negatives if self.negatives else None

    @property
    def p_g(self):
        return (self.tp + self.tn) / self.total if self.total else None

    def metric(self, name):
        if name not in dict(METRIC_CHOICES):
            raise ConfigurationError(f"unknown metric '{name}'")
        return getattr(self, name)


def confusion_counts(label, probability, threshold=0.5, replicate=0, method=''):
    """Classify probability >= threshold as diseased and count against the labels"""
    label = np.asarray(label) == 1
    predicted = np.asarray(probability) >= threshold
    return ReplicateCounts(
        replicate=replicate,
        method=method,
        tp=int(np.count_nonzero(predicted & label)),
        fn=int(np.count_nonzero(~predicted & label)),
        tn=int(np.count_nonzero(~predicted & ~label)),
        fp=int(np.count_nonzero(predicted & ~label)),
    )


@dataclass(frozen=True)
class Estimate:
    mean: float
    ci_low: float
    ci_high: float
    n: int

    @property
    def width(self):
        return self.ci_high - self.ci_low


def summarize(values, ci='normal'):
    """Point estimate and 95 % interval over replicate values"""
    values = np.asarray([value for value in values if value is not None], dtype=float)
    if values.size == 0:
        return None
    mean = float(values.mean())
    if ci == 'percentile':
        low, high = np.percentile(values, [2.5, 97.5])
        return Estimate(mean, float(low), float(high), values.size)
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    half = 1.96 * sd / np.sqrt(values.size)
    return Estimate(mean, mean - half, mean + half, values.size)


@dataclass(frozen=True)
class MethodSummary:
    method: str
    p_d: Estimate
    p_nd: Estimate
    p_g: Estimate
    skipped_p_d: tuple = ()


@dataclass(frozen=True, eq=False)
class EvalReport:
    spec: SplitSpec
    summaries: tuple
    counts: tuple = field(default=())

    @property
    def methods(self):
        return tuple(summary.method for summary in self.summaries)

    def summary(self, method):
        for item in self.summaries:
            if item.method == method:
                return item
        raise KeyError(method)

    def counts_for(self, method):
        return [item for item in self.counts if item.method == method]
