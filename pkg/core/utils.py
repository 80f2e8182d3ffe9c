import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

# Stream keys. A stream is identified by (seed, key...), never by call order.
STREAM_FEATURES = 0
STREAM_NOISE = 1
STREAM_LABELS = 2
STREAM_REPLICATES = 3
STREAM_PERMUTATIONS = 4
STREAM_TRAINING = 5
STREAM_SHAPLEY = 6
STREAM_LIME = 7
STREAM_DUPLICATION = 8
STREAM_SPLIT = 9


def substream(seed, *key):
    """Return the PCG64 generator of stream `key` under `seed`

    Every random draw in the project goes through this function, so a
    given (seed, key) always yields the same sequence regardless of which
    thread consumes it or in which order tasks run.
    """
    if seed is None:
        raise ValueError("a seed is required for reproducible streams")
    sequence = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed, *key):
    """Derive a 63-bit integer seed for a nested component (e.g. one NN training)"""
    return int(substream(seed, *key).integers(0, 2**63 - 1))


def thread_count(requested=None):
    if requested:
        return max(1, int(requested))
    return max(1, int(settings.RISKLAB.get('THREADS') or 1))


def run_parallel(func, tasks, threads=None):
    """Apply `func` to every task and return the results in task order"""
    tasks = list(tasks)
    workers = min(thread_count(threads), len(tasks)) if tasks else 1
    if workers <= 1:
        return [func(task) for task in tasks]
    logger.debug(f"Running {len(tasks)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))
