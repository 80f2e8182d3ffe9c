import logging
from dataclasses import replace

import numpy as np

from core.exceptions import ClassError, UndefinedMetricError
from core.utils import STREAM_DUPLICATION, STREAM_REPLICATES, STREAM_TRAINING, derive_seed, run_parallel, substream
from glm.services import fit_logistic
from nn.services import train as train_network

from .models import EvalReport, MethodSummary, confusion_counts, summarize

logger = logging.getLogger(__name__)


def duplicate_minority(data, seed=0):
    """Replicate the smaller class floor(n_major / n_minor) times and shuffle the rows"""
    positives, negatives = data.positives, data.negatives
    if positives == 0 or negatives == 0:
        raise ClassError("duplication needs both classes to be present")

    minority_label = 1 if positives < negatives else 0
    minority, majority = sorted((positives, negatives))
    copies = majority // minority
    minority_rows = np.flatnonzero(data.label == minority_label)
    majority_rows = np.flatnonzero(data.label != minority_label)
    rows = np.concatenate([majority_rows, np.tile(minority_rows, copies)])
    rows = rows[substream(seed, STREAM_DUPLICATION).permutation(rows.size)]
    if copies > 1:
        logger.debug(f"Duplicated {minority} minority rows {copies} times ({rows.size} rows)")
    return data.take(rows)


def split_rows(n_rows, train_fraction, generator):
    order = generator.permutation(n_rows)
    n_train = min(max(int(round(train_fraction * n_rows)), 1), n_rows - 1)
    return order[:n_train], order[n_train:]


def glm_method(penalty=None, tol=1e-8, max_iter=100):
    def fit(train, seed):
        return fit_logistic(train, penalty, tol=tol, max_iter=max_iter)
    return fit


def nn_method(arch, config):
    def fit(train, seed):
        return train_network(train, arch, replace(config, seed=seed))
    return fit


def _run_replicate(data, methods, split, replicate):
    generator = substream(split.seed, STREAM_REPLICATES, replicate)
    working = data
    if split.duplication == 'before_split':
        working = duplicate_minority(data, derive_seed(split.seed, STREAM_DUPLICATION, replicate))

    train_rows, test_rows = split_rows(working.n_rows, split.train_fraction, generator)
    train, test = working.take(train_rows), working.take(test_rows)
    if split.duplication == 'train_only':
        train = duplicate_minority(train, derive_seed(split.seed, STREAM_DUPLICATION, replicate))

    counts = []
    for name, fitter in methods.items():
        model = fitter(train, derive_seed(split.seed, STREAM_TRAINING, replicate))
        probability = model.predict(test.values)
        counts.append(confusion_counts(test.label, probability, split.threshold, replicate, name))
    return counts


def evaluate(data, methods, split, threads=None):
    """Repeat split / (duplicate) / fit / classify N times and summarize p_d, p_nd, p_g

    `methods` maps a method name to a fitter `fit(train, seed) -> model` whose
    result exposes `predict(matrix)` returning positive-class probabilities.
    """
    logger.info(
        f"Evaluating {', '.join(methods)} over {split.replicates} replicates "
        f"(train fraction {split.train_fraction:.3f}, duplication {split.duplication})"
    )
    per_replicate = run_parallel(
        lambda replicate: _run_replicate(data, methods, split, replicate),
        range(split.replicates),
        threads,
    )
    counts = tuple(item for replicate in per_replicate for item in replicate)

    summaries = []
    for name in methods:
        rows = [item for item in counts if item.method == name]
        skipped = tuple(item.replicate for item in rows if item.p_d is None)
        if skipped:
            logger.warning(f"{name}: {len(skipped)} replicates without test positives skipped for p_d")
        if len(skipped) == len(rows):
            raise UndefinedMetricError('p_d', rows[-1].replicate, "p_d is undefined in every replicate")
        if all(item.p_nd is None for item in rows):
            raise UndefinedMetricError('p_nd', rows[-1].replicate, "p_nd is undefined in every replicate")
        summaries.append(MethodSummary(
            method=name,
            p_d=summarize((item.p_d for item in rows), split.ci),
            p_nd=summarize((item.p_nd for item in rows), split.ci),
            p_g=summarize((item.p_g for item in rows), split.ci),
            skipped_p_d=skipped,
        ))
        logger.info(
            f"{name}: p_d={summaries[-1].p_d.mean:.3f} p_nd={summaries[-1].p_nd.mean:.3f} "
            f"p_g={summaries[-1].p_g.mean:.3f}"
        )
    return EvalReport(split, tuple(summaries), counts)
