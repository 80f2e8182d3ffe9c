import logging
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from scipy.special import expit

from core.exceptions import ConfigurationError, ConvergenceError, SchemaError
from core.utils import STREAM_FEATURES, STREAM_LABELS, STREAM_NOISE, substream

from .models import CATEGORICAL, CONTINUOUS, Column, Dataset

logger = logging.getLogger(__name__)

LABEL_COLUMN = 'label'
INFERRED_MAX_LEVELS = 10


def _draw(config):
    """Draw features, the logit without intercept and the label uniforms

    Each feature column, the noise and the label uniforms come from their own
    stream; row i of the label stream is the i-th uniform whatever the
    other columns look like.
    """
    config.validate()
    n = int(config.n)
    columns = [
        spec.sample(substream(config.seed, STREAM_FEATURES, j), n)
        for j, spec in enumerate(config.distributions)
    ]
    values = np.column_stack(columns)
    noise = substream(config.seed, STREAM_NOISE).normal(0.0, 1.0, size=n) * config.noise_scale
    uniforms = substream(config.seed, STREAM_LABELS).random(n)
    eta = values @ config.coefficients + noise
    return values, eta, uniforms


def _assemble(config, values, eta, uniforms, intercept):
    probability = expit(eta + intercept)
    label = (uniforms < probability).astype(np.int8)
    columns = tuple(
        Column(name, CATEGORICAL, spec.levels) if spec.is_categorical else Column(name, CONTINUOUS)
        for name, spec in zip(config.feature_names, config.distributions)
    )
    provenance = {'seed': int(config.seed), 'intercept': float(intercept), 'generator': 'PCG64'}
    return Dataset(values, columns, label, provenance)


def simulate(config):
    """Simulate a dataset from the logistic model with the configured factors"""
    values, eta, uniforms = _draw(config)
    dataset = _assemble(config, values, eta, uniforms, config.intercept)
    logger.info(
        f"Simulated n={dataset.n_rows} d={dataset.n_features} "
        f"positive_rate={dataset.positive_rate:.4f} seed={config.seed}"
    )
    return dataset


def simulate_imbalanced(config, target_positive_rate, tolerance=0.1, bounds=(-50.0, 50.0), max_iter=200):
    """Simulate with the intercept moved until the positive rate hits the target

    The features, noise and label uniforms are drawn once, so the empirical
    positive rate is a non-decreasing step function of the intercept and
    bisection applies. Stops when the rate is within `tolerance` (relative)
    of the target.
    """
    target = float(target_positive_rate)
    if not 0.0 < target <= 0.5:
        raise ConfigurationError("target_positive_rate must be in (0, 0.5]")

    values, eta, uniforms = _draw(config)

    def rate(intercept):
        return float(np.mean(uniforms < expit(eta + intercept)))

    low, high = bounds
    if rate(low) > target * (1 + tolerance) or rate(high) < target * (1 - tolerance):
        raise ConvergenceError(f"positive rate {target} is unattainable with these coefficients")

    for iteration in range(max_iter):
        middle = 0.5 * (low + high)
        current = rate(middle)
        if abs(current - target) <= tolerance * target:
            logger.info(
                f"Intercept {middle:.6f} gives positive rate {current:.4f} "
                f"(target {target}) after {iteration + 1} bisection steps"
            )
            return _assemble(config, values, eta, uniforms, middle)
        if current < target:
            low = middle
        else:
            high = middle

    raise ConvergenceError(
        f"no intercept within {bounds} gives a positive rate within {tolerance:.0%} of {target} "
        f"(n={config.n} may be too small)"
    )


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + '.meta.yaml')


def write_csv(dataset, path):
    """Write features then `label`; kinds go to a `.meta.yaml` sidecar"""
    path = Path(path)
    frame = pd.DataFrame(dataset.values, columns=list(dataset.feature_names))
    for column in dataset.columns:
        if column.is_categorical:
            frame[column.name] = frame[column.name].astype(np.int64)
    frame[LABEL_COLUMN] = dataset.label.astype(np.int64)
    frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')

    meta = {
        'columns': [
            {'name': column.name, 'kind': column.kind, 'levels': [int(level) for level in column.levels]}
            for column in dataset.columns
        ],
    }
    _sidecar(path).write_text(yaml.safe_dump(meta, sort_keys=False), encoding='utf-8')
    return path


def _infer_column(name, series):
    values = series.to_numpy(dtype=float)
    distinct = np.unique(values)
    if np.all(values == np.round(values)) and len(distinct) <= INFERRED_MAX_LEVELS:
        return Column(name, CATEGORICAL, tuple(int(level) for level in distinct))
    return Column(name, CONTINUOUS)


def read_csv(path):
    path = Path(path)
    frame = pd.read_csv(path, encoding='utf-8')
    if LABEL_COLUMN not in frame.columns:
        raise SchemaError(f"{path} has no '{LABEL_COLUMN}' column")
    features = frame.drop(columns=[LABEL_COLUMN])
    if features.isna().any().any():
        raise SchemaError(f"{path} contains missing values")

    sidecar = _sidecar(path)
    if sidecar.exists():
        meta = yaml.safe_load(sidecar.read_text(encoding='utf-8')) or {}
        columns = tuple(
            Column(item['name'], item.get('kind', CONTINUOUS), tuple(item.get('levels') or ()))
            for item in meta.get('columns', [])
        )
        if tuple(column.name for column in columns) != tuple(features.columns):
            raise SchemaError(f"{sidecar} does not describe the columns of {path}")
    else:
        columns = tuple(_infer_column(name, features[name]) for name in features.columns)

    return Dataset(features.to_numpy(dtype=float), columns, frame[LABEL_COLUMN].to_numpy(), {'source': str(path)})
