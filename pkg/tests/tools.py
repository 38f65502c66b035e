# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import math
import os
from contextlib import contextmanager

import numpy as np
import pytest

from mmldf.core.config import MmldfConfig
from mmldf.core.dataset import LabeledDataset

# Statistical protocol checks take minutes; opt in with RUN_SLOW_TESTS=1.
slow = pytest.mark.skipif(
    not os.environ.get("RUN_SLOW_TESTS"), reason="Set RUN_SLOW_TESTS=1 to run"
)


@contextmanager
def config_values(**kwargs):
    MmldfConfig.set(**kwargs)
    try:
        yield
    finally:
        MmldfConfig.unset(*kwargs)


def random_dataset(seed, n=20, d=12, K=2, scale=1.0):
    """Gaussian features with balanced, shuffled labels; every class present."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % K
    rng.shuffle(labels)
    features = scale * rng.standard_normal((n, d))
    return LabeledDataset(features, labels, tuple(str(k) for k in range(K)))


def dataset(rows, labels, K=None):
    if K is None:
        K = max(labels) + 1
    return LabeledDataset(
        np.array(rows, dtype=np.float64), labels, tuple(str(k) for k in range(K))
    )


def random_projection(seed, d, r):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((d, r)) / math.sqrt(d)


def random_unit_trace(rng, K):
    A = rng.standard_normal((K, K))
    omega = A.dot(A.T) + 0.1 * np.eye(K)
    return omega / np.trace(omega)


def is_non_increasing(values):
    return all(b <= a for a, b in zip(values, values[1:]))
