# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals


class MmldfError(Exception):
    """Base class for every error raised by mmldf."""


class ConfigurationError(MmldfError, ValueError):
    """Invalid hyperparameters, configs or command-line flags."""


class DatasetError(MmldfError):
    """A dataset violates its invariants."""


class DatasetParseError(DatasetError):
    """Malformed LIBSVM or CSV input."""

    def __init__(self, message, line=None):
        super(DatasetParseError, self).__init__(message)
        self.line = line


class EmptyClassError(DatasetError):
    """A class index has no samples where every class is required."""


class DimensionMismatch(MmldfError, ValueError):
    """Array shapes do not agree."""


class NumericalError(MmldfError):
    """A numerical kernel or optimizer could not produce a finite answer."""


class NotSymmetric(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    """Cholesky factorization broke down at ``pivot`` (0-based)."""

    def __init__(self, pivot):
        super(NotPositiveDefinite, self).__init__(
            "matrix is not positive definite: factorization failed at pivot "
            "{}".format(pivot)
        )
        self.pivot = pivot


class IndefiniteMatrix(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class NonFiniteValue(NumericalError):
    pass
