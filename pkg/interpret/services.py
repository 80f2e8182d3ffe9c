import logging

import numpy as np
from scipy.special import gammaln

from core.exceptions import (
    ConfigurationError,
    RankError,
    SchemaError,
    SizeError,
    UndefinedMetricError,
    UnsupportedArchitectureError,
    UnsupportedFeatureError,
)
from core.utils import STREAM_LIME, STREAM_PERMUTATIONS, STREAM_SHAPLEY, run_parallel, substream
from evaluation.models import METRIC_CHOICES, confusion_counts, summarize

from .models import DOWN, STABLE, ImportanceReport, LekProfile, LimeExplanation

logger = logging.getLogger(__name__)

MAX_SHAPLEY_FEATURES = 15
INDEPENDENCE_NOTE = "conditional expectations assume independent features"
METRICS = tuple(name for name, _ in METRIC_CHOICES)


def _group_columns(test, groups):
    if groups is None:
        return [(name, [index]) for index, name in enumerate(test.feature_names)]
    resolved = []
    for group in groups:
        group = [group] if isinstance(group, (str, int, np.integer)) else list(group)
        if not group:
            raise ConfigurationError("permutation groups must not be empty")
        columns = [test.column_index(item) for item in group]
        resolved.append(('+'.join(test.feature_names[j] for j in columns), columns))
    return resolved


def permutation_importance(model, test, metric='p_d', n_repeats=100, seed=0, threshold=0.5,
                           groups=None, threads=None):
    """Shuffle each feature (or group) of the test set N times with the model fixed

    Scores are the mean of `metric` after permutation; extras carry all three
    metrics with normal 95 % intervals and a `down` / `stable` marker per
    feature. A group is shuffled jointly (one row permutation for all its
    columns), which keeps within-group dependence intact.
    """
    if metric not in METRICS:
        raise ConfigurationError(f"unknown metric '{metric}'")
    if n_repeats < 1:
        raise ConfigurationError("at least one permutation is required")

    baseline_counts = confusion_counts(test.label, model.predict(test.values), threshold)
    baselines = {name: baseline_counts.metric(name) for name in METRICS}
    if baselines[metric] is None:
        raise UndefinedMetricError(metric, 0, f"{metric} is undefined on the unpermuted test set")

    resolved = _group_columns(test, groups)

    def run(task):
        index, (label, columns) = task
        generator = substream(seed, STREAM_PERMUTATIONS, index)
        values = {name: [] for name in METRICS}
        for replicate in range(n_repeats):
            order = generator.permutation(test.n_rows)
            matrix = test.values.copy()
            matrix[:, columns] = test.values[order][:, columns]
            counts = confusion_counts(test.label, model.predict(matrix), threshold, replicate, label)
            for name in METRICS:
                values[name].append(counts.metric(name))
        if any(value is None for value in values[metric]):
            raise UndefinedMetricError(metric, values[metric].index(None))
        return values

    results = run_parallel(run, list(enumerate(resolved)), threads)

    table = {name: {'mean': [], 'ci_low': [], 'ci_high': []} for name in METRICS}
    for values in results:
        for name in METRICS:
            estimate = summarize(values[name])
            for key in table[name]:
                table[name][key].append(getattr(estimate, key) if estimate else None)

    scores = np.array(table[metric]['mean'])
    ci_low = np.array(table[metric]['ci_low'])
    ci_high = np.array(table[metric]['ci_high'])
    direction = [DOWN if high < baselines[metric] else STABLE for high in ci_high]
    labels = [label for label, _ in resolved]
    logger.info(
        f"Permutation importance ({metric}, N={n_repeats}): baseline {baselines[metric]:.3f}, "
        + ', '.join(f"{label} {score:.3f}" for label, score in zip(labels, scores))
    )
    return ImportanceReport(
        method='permutation',
        feature_names=labels,
        scores=scores,
        replicates=n_repeats,
        baseline=baselines[metric],
        metric=metric,
        ci_low=ci_low,
        ci_high=ci_high,
        extras={'metrics': table, 'baselines': baselines, 'direction': direction,
                'groups': [[test.feature_names[j] for j in columns] for _, columns in resolved]},
    )


def _output_weights(model):
    beta = model.weights[-1][1:]
    if beta.shape[1] == 2:
        return np.abs(beta[:, 1] - beta[:, 0])
    return np.abs(beta).sum(axis=1)


def garson(model):
    """Relative importance of each input from |input weights| times |output weight|"""
    if len(model.hidden) != 1:
        raise UnsupportedArchitectureError(
            f"Garson's algorithm needs exactly one hidden layer, the model has {len(model.hidden)}"
        )
    inputs = np.abs(model.weights[0][1:])
    outputs = _output_weights(model)
    column_totals = inputs.sum(axis=0)
    shares = np.divide(inputs, column_totals, out=np.zeros_like(inputs), where=column_totals > 0)
    contributions = (shares * outputs).sum(axis=1)
    total = contributions.sum()
    notes = ()
    if total > 0:
        scores = contributions / total
    else:
        scores = np.full(model.n_inputs, 1.0 / model.n_inputs)
        notes = ("all connection weights are zero; importances set to 1/d",)
    return ImportanceReport(method='garson', feature_names=model.feature_names, scores=scores, notes=notes)


def _quantile_rows(data, quantiles):
    rows = np.empty((len(quantiles), data.n_features))
    for j, column in enumerate(data.columns):
        method = 'nearest' if column.is_categorical else 'linear'
        rows[:, j] = np.quantile(data.values[:, j], quantiles, method=method)
    return rows


def lek_profile(model, data, feature, grid_points=20, quantiles=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Response along feature j with every other feature pinned at each quantile"""
    j = data.column_index(feature)
    if data.columns[j].is_categorical:
        raise UnsupportedFeatureError(f"Lek's profile needs a continuous feature, '{data.feature_names[j]}' is categorical")
    if grid_points < 2:
        raise ConfigurationError("Lek's profile needs at least two grid points")
    quantiles = tuple(float(q) for q in quantiles)
    if not quantiles or any(not 0.0 <= q <= 1.0 for q in quantiles):
        raise ConfigurationError("quantile levels must lie in [0, 1]")

    column = data.values[:, j]
    grid = np.linspace(column.min(), column.max(), grid_points)
    probabilities = np.empty((len(quantiles), grid_points))
    for index, base in enumerate(_quantile_rows(data, quantiles)):
        rows = np.tile(base, (grid_points, 1))
        rows[:, j] = grid
        probabilities[index] = model.predict(rows)

    if grid[-1] > grid[0]:
        derivatives = np.gradient(probabilities, grid, axis=1)
    else:
        logger.warning(f"Feature {data.feature_names[j]} is constant; Lek derivatives set to 0")
        derivatives = np.zeros_like(probabilities)
    return LekProfile(data.feature_names[j], grid, quantiles, probabilities, derivatives)


def _subset_weights(d):
    """|S|! (d - |S| - 1)! / d! for |S| = 0..d-1, computed in log space"""
    sizes = np.arange(d)
    return np.exp(gammaln(sizes + 1) + gammaln(d - sizes) - gammaln(d + 1))


def _shapley_from_table(table, d):
    weights = _subset_weights(d)
    sizes = np.array([bin(mask).count('1') for mask in range(1 << d)])
    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        without = np.array([mask for mask in range(1 << d) if not mask & bit])
        phi[i] = np.sum(weights[sizes[without]] * (table[without | bit] - table[without]))
    return phi


def shapley_values(value_function, d):
    """Exact Shapley values of a coalition game over d players

    `value_function` receives a sorted tuple of player indices; subsets are
    enumerated exhaustively, so d is capped at 15.
    """
    if d < 1:
        raise ConfigurationError("at least one feature is required")
    if d > MAX_SHAPLEY_FEATURES:
        raise SizeError(f"exact Shapley enumeration supports at most {MAX_SHAPLEY_FEATURES} features, got {d}")
    table = np.empty(1 << d)
    for mask in range(1 << d):
        table[mask] = value_function(tuple(i for i in range(d) if mask >> i & 1))
    return _shapley_from_table(table, d)


def shapley(model, data, mc_samples=50, seed=0, outer_rows=200, threads=None):
    """Shapley decomposition of var(f(X)) with val(u) = var(E[f(X) | X_u])

    The inner expectation is a Monte Carlo mean over `mc_samples` draws of
    the complementary coordinates from their empirical marginals. Every
    subset reuses the same draws; the within-row variance of the draws is
    subtracted from var(means) so val is not inflated by Monte Carlo noise.
    """
    d = data.n_features
    if d > MAX_SHAPLEY_FEATURES:
        raise SizeError(
            f"exact Shapley enumeration supports at most {MAX_SHAPLEY_FEATURES} features, got {d}; "
            "use a sampling estimator for wider data"
        )
    if mc_samples < 1 or outer_rows < 1:
        raise ConfigurationError("Shapley needs at least one Monte Carlo sample and one outer row")

    generator = substream(seed, STREAM_SHAPLEY)
    n = data.n_rows
    if outer_rows >= n:
        outer = data.values
    else:
        outer = data.values[np.sort(generator.choice(n, outer_rows, replace=False))]
    n_outer = outer.shape[0]
    donors = generator.integers(0, n, size=(n_outer, mc_samples, d))
    background = data.values[donors, np.arange(d)]

    full_value = float(np.var(model.predict(outer)))

    def value(mask):
        if mask == 0:
            return 0.0
        if mask == (1 << d) - 1:
            return full_value
        columns = [i for i in range(d) if mask >> i & 1]
        draws = background.copy()
        draws[:, :, columns] = outer[:, None, columns]
        predictions = model.predict(draws.reshape(-1, d)).reshape(n_outer, mc_samples)
        means = predictions.mean(axis=1)
        spread = predictions.var(axis=1, ddof=1).mean() / mc_samples if mc_samples > 1 else 0.0
        return float(np.var(means) - spread)

    table = np.array(run_parallel(value, range(1 << d), threads))
    phi = _shapley_from_table(table, d)
    logger.info(
        f"Shapley over {1 << d} subsets ({n_outer} rows x {mc_samples} draws): total variance {full_value:.5f}"
    )
    return ImportanceReport(
        method='shapley',
        feature_names=data.feature_names,
        scores=phi,
        replicates=mc_samples,
        baseline=full_value,
        extras={'outer_rows': n_outer, 'subset_values': {
            ','.join(data.feature_names[i] for i in range(d) if mask >> i & 1) or '{}': float(table[mask])
            for mask in range(1 << d)
        }},
        notes=(INDEPENDENCE_NOTE,),
    )


def _baseline(data):
    """Column mean for continuous features, the most frequent level for categorical ones"""
    baseline = data.values.mean(axis=0)
    for j, column in enumerate(data.columns):
        if column.is_categorical:
            levels, counts = np.unique(data.values[:, j], return_counts=True)
            baseline[j] = levels[np.argmax(counts)]
    return baseline


def _weighted_fit(masks, outputs, weights, columns):
    design = np.column_stack([np.ones(masks.shape[0]), masks[:, list(columns)]])
    root = np.sqrt(weights)
    scaled = design * root[:, None]
    if np.linalg.matrix_rank(scaled) < design.shape[1]:
        raise RankError(f"perturbation design has rank below {design.shape[1]}")
    coefficients = np.linalg.lstsq(scaled, outputs * root, rcond=None)[0]
    residual = outputs - design @ coefficients
    return coefficients, float(np.sum(weights * residual ** 2))


def _forward_selection(masks, outputs, weights, n_features):
    selected = []
    for _ in range(n_features):
        best = None
        for candidate in range(masks.shape[1]):
            if candidate in selected:
                continue
            try:
                _, fit_loss = _weighted_fit(masks, outputs, weights, selected + [candidate])
            except RankError:
                continue
            if best is None or fit_loss < best[1]:
                best = (candidate, fit_loss)
        if best is None:
            raise RankError(f"no feature can be added to {len(selected)} selected without a rank-deficient design")
        selected.append(best[0])
    return selected


def _highest_weights(masks, outputs, weights, n_features):
    coefficients, _ = _weighted_fit(masks, outputs, weights, range(masks.shape[1]))
    order = np.argsort(-np.abs(coefficients[1:]), kind='stable')
    return [int(j) for j in order[:n_features]]


SELECTIONS = {
    'forward': _forward_selection,
    'highest_weights': _highest_weights,
}


def lime_explain(model, x, data, n_features=3, n_perturb=500, kernel_width=None, seed=0, selection='forward'):
    """Local weighted-least-squares surrogate on the binary keep / replace representation

    Row 0 of the perturbation sample is the instance itself; every other row
    replaces a uniformly drawn number of features by their baseline value.
    Proximity is exp(-D^2 / sigma^2) with D the Euclidean distance on
    standardized features; sigma defaults to 0.75 sqrt(d) and an infinite
    sigma gives every perturbation the same weight.
    """
    d = data.n_features
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise SchemaError(f"instance has shape {x.shape}, expected ({d},)")
    if not 1 <= n_features <= d:
        raise ConfigurationError(f"the feature budget must be between 1 and {d}")
    if n_perturb < d + 1:
        raise ConfigurationError(f"at least {d + 1} perturbations are required")
    if selection not in SELECTIONS:
        raise ConfigurationError(f"unknown LIME selection '{selection}'")
    sigma = 0.75 * np.sqrt(d) if kernel_width is None else float(kernel_width)
    if not sigma > 0:
        raise ConfigurationError("kernel width must be > 0")

    generator = substream(seed, STREAM_LIME)
    masks = np.ones((n_perturb, d))
    for row in range(1, n_perturb):
        switched_off = generator.choice(d, generator.integers(1, d + 1), replace=False)
        masks[row, switched_off] = 0.0

    baseline = _baseline(data)
    samples = np.where(masks == 1.0, x, baseline)
    outputs = np.asarray(model.predict(samples), dtype=float)

    scale = data.values.std(axis=0)
    scale[scale == 0.0] = 1.0
    distances = np.sum(((samples - x) / scale) ** 2, axis=1)
    weights = np.ones(n_perturb) if np.isinf(sigma) else np.exp(-distances / sigma ** 2)

    selected = SELECTIONS[selection](masks, outputs, weights, n_features)
    fitted, fit_loss = _weighted_fit(masks, outputs, weights, selected)
    coefficients = np.zeros(d)
    coefficients[selected] = fitted[1:]
    logger.debug(f"LIME selected {[data.feature_names[j] for j in selected]} with loss {fit_loss:.3g}")
    return LimeExplanation(
        feature_names=data.feature_names,
        instance=x,
        baseline=baseline,
        intercept=float(fitted[0]),
        coefficients=coefficients,
        selected=tuple(selected),
        loss=fit_loss,
        masks=masks,
        kernel_weights=weights,
        outputs=outputs,
        kernel_width=sigma,
    )
