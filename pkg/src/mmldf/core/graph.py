# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import numpy as np

from mmldf.core.error import DimensionMismatch

# Implemented scatter term: tr(Z^T L Z), half of the ordered-pair double sum.
SCATTER_CONVENTION = "tr(P^T X^T L X P)"


class ClassPartition(object):
    """
    The within-class graph with 0/1 weights (A_ij = 1 iff samples i and j
    share a class), held implicitly as the class partition. The degree of
    sample i is the size of its class and L = D - A.
    """

    __slots__ = ("groups", "sizes", "n")

    def __init__(self, groups, n):
        self.groups = tuple(np.asarray(g, dtype=np.intp) for g in groups)
        self.sizes = np.array([g.shape[0] for g in self.groups], dtype=np.intp)
        self.n = n
        for group in self.groups:
            group.setflags(write=False)
        self.sizes.setflags(write=False)

    def __repr__(self):
        return "<ClassPartition(n={}, sizes={})>".format(self.n, self.sizes.tolist())

    def dense_laplacian(self):
        """Materialized n x n Laplacian; diagnostics and tests only."""
        L = np.zeros((self.n, self.n))
        for group in self.groups:
            L[np.ix_(group, group)] = -1.0
            L[group, group] += group.shape[0]
        return L


def build_partition(labels, num_classes=None):
    labels = np.asarray(labels, dtype=np.intp)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 0
    groups = [np.flatnonzero(labels == k) for k in range(num_classes)]
    return ClassPartition(groups, labels.shape[0])


def _check_rows(Z, part):
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != part.n:
        raise DimensionMismatch(
            "expected {} rows, got shape {}".format(part.n, Z.shape)
        )
    return Z


def scatter_value(Z, part):
    """
    tr(Z^T L Z) computed per class as |c| * sum ||z_i||^2 - ||sum z_i||^2.
    """
    Z = _check_rows(Z, part)
    total = 0.0
    for group, size in zip(part.groups, part.sizes):
        if size < 2:
            continue
        block = Z[group]
        total += size * np.sum(block * block) - np.sum(block.sum(axis=0) ** 2)
    return float(total)


def laplacian_apply(Z, part):
    """
    L Z without forming L: row i becomes |c(i)| z_i - sum_{j in c(i)} z_j.
    """
    Z = _check_rows(Z, part)
    out = np.zeros_like(Z)
    for group, size in zip(part.groups, part.sizes):
        if size == 0:
            continue
        block = Z[group]
        out[group] = size * block - block.sum(axis=0)
    return out
