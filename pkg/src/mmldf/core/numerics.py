# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from mmldf.core.config import mmldf_config
from mmldf.core.error import (
    DimensionMismatch,
    IndefiniteMatrix,
    NonFiniteValue,
    NotPositiveDefinite,
    NotSymmetric,
    SingularMatrix,
)

logger = logging.getLogger(__name__)


def max_abs(M):
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def as_symmetric(M):
    """
    Validate a square, finite, symmetric matrix (to the configured relative
    tolerance) and return it as a float64 array.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch("expected a square matrix, got shape {}".format(M.shape))
    if not np.all(np.isfinite(M)):
        raise NonFiniteValue("matrix has non-finite entries")
    tol = mmldf_config.value("symmetry_tol")
    if max_abs(M - M.T) > tol * max(1.0, max_abs(M)):
        raise NotSymmetric("matrix is not symmetric")
    return M


def solve_spd(M, rhs):
    """
    Solve M X = rhs for symmetric positive definite M via Cholesky. ``rhs``
    may be a vector or a matrix.
    """
    M = as_symmetric(M)
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != M.shape[0]:
        raise DimensionMismatch(
            "rhs has {} rows for a system of order {}".format(rhs.shape[0], M.shape[0])
        )
    if M.shape[0] == 0:
        return rhs.copy()
    factor, info = lapack.dpotrf(M, lower=False, clean=True)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    return linalg.cho_solve((factor, False), rhs, check_finite=False)


def sym_eig(M):
    """
    Eigendecomposition of a symmetric matrix with eigenvalues in descending
    order and orthonormal eigenvectors as columns.
    """
    M = as_symmetric(M)
    values, vectors = linalg.eigh(M)
    return values[::-1], vectors[:, ::-1]


def _clamped_eig(M):
    values, vectors = sym_eig(M)
    threshold = mmldf_config.value("psd_clamp_tol") * max_abs(M)
    if values.size and values[-1] < -threshold:
        raise IndefiniteMatrix(
            "matrix is indefinite: smallest eigenvalue {!r}".format(float(values[-1]))
        )
    return np.maximum(values, 0.0), vectors


def psd_sqrt(M):
    values, vectors = _clamped_eig(M)
    S = (vectors * np.sqrt(values)).dot(vectors.T)
    return 0.5 * (S + S.T)


def psd_inv(M, ridge=0.0):
    """
    (M + ridge I)^-1 for symmetric PSD M via eigendecomposition.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    values, vectors = _clamped_eig(M)
    shifted = values + ridge
    floor = mmldf_config.value("psd_clamp_tol") * max(max_abs(M), ridge)
    if shifted.size and shifted[-1] <= floor:
        raise SingularMatrix(
            "matrix is singular: smallest shifted eigenvalue {!r}".format(
                float(shifted[-1])
            )
        )
    inverse = (vectors / shifted).dot(vectors.T)
    return 0.5 * (inverse + inverse.T)
