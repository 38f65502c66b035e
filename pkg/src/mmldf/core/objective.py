# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging
import math

import numpy as np

from mmldf.core.config import mmldf_config
from mmldf.core.dataset import LabeledDataset
from mmldf.core.error import ConfigurationError, DatasetError, DimensionMismatch
from mmldf.core.graph import build_partition, laplacian_apply, scatter_value
from mmldf.core.numerics import psd_inv

logger = logging.getLogger(__name__)

MARGIN_BINARY = 1.0
MARGIN_MULTI = 2.0

# Human-readable activation rules, copied into every report.
ACTIVATION_RULES = {
    "binary": "y_i * (w^T P^T x_i + b) - 1 <= 0",
    "multiclass": "score(y_i) - score(m) - 2 < 0, m != y_i",
}


class Hyperparams(object):
    """
    Trade-offs of the objective: ``C`` (hinge), ``eta`` (within-class
    scatter), ``lam`` (row-sparsity), ``rho`` (task correlation) and the
    target dimension ``r``.
    """

    __slots__ = ("C", "eta", "lam", "rho", "r", "eps_smooth", "omega_ridge")

    def __init__(
        self, C=1.0, eta=0.0, lam=1e-4, rho=0.0, r=2, eps_smooth=None, omega_ridge=None
    ):
        if eps_smooth is None:
            eps_smooth = mmldf_config.value("eps_smooth")
        if omega_ridge is None:
            omega_ridge = mmldf_config.value("omega_ridge")
        self.C = float(C)
        self.eta = float(eta)
        self.lam = float(lam)
        self.rho = float(rho)
        self.r = int(r)
        self.eps_smooth = float(eps_smooth)
        self.omega_ridge = float(omega_ridge)

        for name in ("C", "eta", "lam", "rho", "omega_ridge"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ConfigurationError("{} must be >= 0, got {!r}".format(name, value))
        if not self.eps_smooth > 0.0:
            raise ConfigurationError("eps_smooth must be > 0")
        if self.r < 1:
            raise ConfigurationError("r must be >= 1")

    def __repr__(self):
        return "Hyperparams({})".format(
            ", ".join("{}={!r}".format(k, v) for k, v in self.to_dict().items())
        )

    def __eq__(self, other):
        if not isinstance(other, Hyperparams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in self.__slots__}
        values.update(changes)
        return Hyperparams(**values)

    def to_dict(self):
        return {
            "C": self.C,
            "eta": self.eta,
            "lambda": self.lam,
            "rho": self.rho,
            "r": self.r,
            "eps_smooth": self.eps_smooth,
            "omega_ridge": self.omega_ridge,
            "margin_binary": MARGIN_BINARY,
            "margin_multi": MARGIN_MULTI,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            C=data["C"],
            eta=data["eta"],
            lam=data["lambda"],
            rho=data["rho"],
            r=data["r"],
            eps_smooth=data["eps_smooth"],
            omega_ridge=data["omega_ridge"],
        )


class ProjectionModel(object):
    """The learned d x r transformation matrix P."""

    __slots__ = ("P",)

    def __init__(self, P):
        P = np.array(P, dtype=np.float64)
        if P.ndim != 2:
            raise DimensionMismatch("P must be a d x r matrix")
        if not np.all(np.isfinite(P)):
            raise DatasetError("P has non-finite entries")
        P.setflags(write=False)
        self.P = P

    def __repr__(self):
        return "<ProjectionModel(d={}, r={})>".format(self.d, self.r)

    @property
    def d(self):
        return self.P.shape[0]

    @property
    def r(self):
        return self.P.shape[1]


class MarginModel(object):
    """
    Classifier parameters in the projected space. Binary models store w as
    the single column of ``W`` and have no ``omega``; multi-class models
    store one column per class and the unit-trace task covariance ``omega``.
    """

    __slots__ = ("W", "bias", "omega")

    TRACE_TOL = 1e-8

    def __init__(self, W, bias, omega=None):
        W = np.array(W, dtype=np.float64)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        bias = np.array(bias, dtype=np.float64).reshape(-1)
        if bias.shape[0] != W.shape[1]:
            raise DimensionMismatch(
                "{} biases for {} weight vectors".format(bias.shape[0], W.shape[1])
            )
        if omega is not None:
            omega = np.array(omega, dtype=np.float64)
            if omega.shape != (W.shape[1], W.shape[1]):
                raise DimensionMismatch("omega must be K x K")
            if abs(np.trace(omega) - 1.0) > self.TRACE_TOL:
                raise ConfigurationError("omega must have unit trace")
            omega.setflags(write=False)
        W.setflags(write=False)
        bias.setflags(write=False)
        self.W = W
        self.bias = bias
        self.omega = omega

    def __repr__(self):
        return "<MarginModel(mode={}, r={}, K={})>".format(
            self.mode, self.W.shape[0], self.W.shape[1]
        )

    @property
    def is_binary(self):
        return self.omega is None

    @property
    def mode(self):
        return "binary" if self.is_binary else "multiclass"

    @property
    def w(self):
        return self.W[:, 0]

    @property
    def b(self):
        return float(self.bias[0])


class ActiveSetBinary(object):
    """Sorted indices of samples meeting or violating the unit margin."""

    __slots__ = ("indices",)

    def __init__(self, indices):
        self.indices = np.asarray(indices, dtype=np.intp)

    def __len__(self):
        return self.indices.shape[0]

    def __iter__(self):
        return iter(self.indices.tolist())

    def __eq__(self, other):
        if not isinstance(other, ActiveSetBinary):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None


class ActiveSetMulti(object):
    """Sorted (sample, wrong class) pairs violating the margin of 2."""

    __slots__ = ("pairs",)

    def __init__(self, pairs):
        self.pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)

    def __len__(self):
        return self.pairs.shape[0]

    def __iter__(self):
        return iter(tuple(pair) for pair in self.pairs.tolist())

    def __eq__(self, other):
        if not isinstance(other, ActiveSetMulti):
            return NotImplemented
        return np.array_equal(self.pairs, other.pairs)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None


def as_matrix(P):
    if isinstance(P, ProjectionModel):
        return P.P
    return np.asarray(P, dtype=np.float64)


def _project(ds, P):
    P = as_matrix(P)
    if P.ndim != 2 or P.shape[0] != ds.d:
        raise DimensionMismatch(
            "P has shape {}, data has d={}".format(P.shape, ds.d)
        )
    return P, ds.features.dot(P)


def _partition(ds, part):
    if part is None:
        return build_partition(ds.labels, ds.K)
    return part


def l21_smoothed(P, eps_smooth):
    """Sum over rows of sqrt(||p_i||^2 + eps_smooth)."""
    P = as_matrix(P)
    return float(np.sum(np.sqrt(np.sum(P * P, axis=1) + eps_smooth)))


def row_weight_diagonal(P, eps_smooth):
    """Diagonal of D_P: 1 / (2 sqrt(||p_i||^2 + eps_smooth))."""
    P = as_matrix(P)
    return 0.5 / np.sqrt(np.sum(P * P, axis=1) + eps_smooth)


def _l21_gradient(P, eps_smooth):
    return 2.0 * row_weight_diagonal(P, eps_smooth)[:, np.newaxis] * P


def hinge_binary(score, y):
    """Quadratic hinge [min(0, y * score - 1)]^2; broadcasts over arrays."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(np.abs(y) != 1.0):
        raise ValueError("y must be -1 or +1")
    violation = np.minimum(0.0, y * np.asarray(score, dtype=np.float64) - MARGIN_BINARY)
    result = violation * violation
    if result.ndim == 0:
        return float(result)
    return result


def _check_w(P, w):
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != P.shape[1]:
        raise DimensionMismatch(
            "w has length {}, P has r={}".format(w.shape[0], P.shape[1])
        )
    return w


def active_set_binary(ds, P, w, b):
    y = ds.signs()
    P, Z = _project(ds, P)
    scores = Z.dot(_check_w(P, w)) + b
    return ActiveSetBinary(np.flatnonzero(y * scores - MARGIN_BINARY <= 0.0))


def objective_binary(ds, P, w, b, hp, part=None):
    y = ds.signs()
    P, Z = _project(ds, P)
    w = _check_w(P, w)
    violation = np.minimum(0.0, y * (Z.dot(w) + b) - MARGIN_BINARY)
    value = 0.5 * w.dot(w) + hp.C * violation.dot(violation)
    if hp.eta:
        value += hp.eta * scatter_value(Z, _partition(ds, part))
    if hp.lam:
        value += hp.lam * l21_smoothed(P, hp.eps_smooth)
    return float(value)


def grad_P_binary(ds, P, w, b, hp, part=None):
    """
    Gradient in P at fixed (w, b):
    2C sum_Theta (x_i x_i^T P w w^T - (y_i - b) x_i w^T)
    + 2 eta X^T L X P + 2 lam D_P P.
    """
    y = ds.signs()
    P, Z = _project(ds, P)
    w = _check_w(P, w)
    scores = Z.dot(w) + b
    residual = np.where(y * scores - MARGIN_BINARY <= 0.0, scores - y, 0.0)
    grad = 2.0 * hp.C * np.outer(ds.features.T.dot(residual), w)
    if hp.eta:
        grad += 2.0 * hp.eta * ds.features.T.dot(
            laplacian_apply(Z, _partition(ds, part))
        )
    if hp.lam:
        grad += hp.lam * _l21_gradient(P, hp.eps_smooth)
    return grad


def _check_multi(ds, P, W, bias):
    if ds.K < 3:
        raise DatasetError(
            "multi-class objective needs at least 3 classes, got {}".format(ds.K)
        )
    P, Z = _project(ds, P)
    W = np.asarray(W, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64).reshape(-1)
    if W.shape != (P.shape[1], ds.K) or bias.shape[0] != ds.K:
        raise DimensionMismatch(
            "W must be {} x {} with {} biases".format(P.shape[1], ds.K, ds.K)
        )
    return P, Z, W, bias


def multi_gaps(Z, W, bias, labels):
    """
    Margin gaps score(y_i) - score(m) - 2 and the mask of active pairs.
    """
    rows = np.arange(labels.shape[0])
    scores = Z.dot(W) + bias
    gaps = scores[rows, labels][:, np.newaxis] - scores - MARGIN_MULTI
    mask = gaps < 0.0
    mask[rows, labels] = False
    return gaps, mask


def active_set_multi(ds, P, W, bias):
    P, Z, W, bias = _check_multi(ds, P, W, bias)
    _, mask = multi_gaps(Z, W, bias, ds.labels)
    return ActiveSetMulti(np.argwhere(mask))


def correlation_penalty(W, Omega, rho, omega_ridge):
    """rho * tr(W (Omega + ridge I)^-1 W^T)."""
    if not rho:
        return 0.0
    W = np.asarray(W, dtype=np.float64)
    gamma = psd_inv(Omega, omega_ridge)
    return float(rho * np.sum(W.dot(gamma) * W))


def correlation_penalty_grad(W, Omega, rho, omega_ridge):
    W = np.asarray(W, dtype=np.float64)
    if not rho:
        return np.zeros_like(W)
    return 2.0 * rho * W.dot(psd_inv(Omega, omega_ridge))


def objective_multi(ds, P, W, bias, Omega, hp, part=None):
    P, Z, W, bias = _check_multi(ds, P, W, bias)
    gaps, mask = multi_gaps(Z, W, bias, ds.labels)
    active = gaps[mask]
    value = 0.5 * np.sum(W * W) + hp.C * active.dot(active)
    if hp.eta:
        value += hp.eta * scatter_value(Z, _partition(ds, part))
    if hp.lam:
        value += hp.lam * l21_smoothed(P, hp.eps_smooth)
    value += correlation_penalty(W, Omega, hp.rho, hp.omega_ridge)
    return float(value)


def grad_P_multi(ds, P, W, bias, hp, part=None):
    """
    Gradient in P: 2C sum over active pairs of gap * x_i (w_{y_i} - w_m)^T
    + 2 eta X^T L X P + 2 lam D_P P; the correlation term does not involve P.
    """
    P, Z, W, bias = _check_multi(ds, P, W, bias)
    gaps, mask = multi_gaps(Z, W, bias, ds.labels)
    active = np.where(mask, gaps, 0.0)
    coefficients = -active
    coefficients[np.arange(ds.n), ds.labels] = active.sum(axis=1)
    grad = 2.0 * hp.C * ds.features.T.dot(coefficients.dot(W.T))
    if hp.eta:
        grad += 2.0 * hp.eta * ds.features.T.dot(
            laplacian_apply(Z, _partition(ds, part))
        )
    if hp.lam:
        grad += hp.lam * _l21_gradient(P, hp.eps_smooth)
    return grad


def objective(ds, P, margin, hp, part=None):
    """Full objective of either path for a MarginModel."""
    if margin.is_binary:
        return objective_binary(ds, P, margin.w, margin.b, hp, part)
    return objective_multi(ds, P, margin.W, margin.bias, margin.omega, hp, part)


def grad_P(ds, P, margin, hp, part=None):
    if margin.is_binary:
        return grad_P_binary(ds, P, margin.w, margin.b, hp, part)
    return grad_P_multi(ds, P, margin.W, margin.bias, hp, part)


def decision_scores(P, margin, X):
    return np.asarray(X, dtype=np.float64).dot(as_matrix(P)).dot(margin.W) + margin.bias


def predict_margin(P, margin, X):
    """Class indices predicted by the learned margin model itself."""
    scores = decision_scores(P, margin, X)
    if margin.is_binary:
        return (scores[:, 0] >= 0.0).astype(np.intp)
    return np.argmax(scores, axis=1)


def check_gradient(fun, grad, x, step=1e-5):
    """
    Compare an analytic gradient against central finite differences.

    Returns the largest absolute deviation divided by max(1, ||numeric||_inf)
    and the numeric gradient.
    """
    x = np.array(x, dtype=np.float64)
    analytic = np.asarray(grad(x), dtype=np.float64)
    numeric = np.empty_like(x)
    flat = x.reshape(-1)
    out = numeric.reshape(-1)
    for j in range(flat.shape[0]):
        original = flat[j]
        flat[j] = original + step
        upper = fun(x)
        flat[j] = original - step
        lower = fun(x)
        flat[j] = original
        out[j] = (upper - lower) / (2.0 * step)
    scale = max(1.0, float(np.max(np.abs(numeric))) if numeric.size else 0.0)
    error = float(np.max(np.abs(analytic - numeric))) / scale if numeric.size else 0.0
    return error, numeric


def random_gradient_check(seed, n=20, d=12, r=4, K=2, eps_smooth=None, step=1e-5):
    """
    Gradient check of the objective in P on a seeded random instance with
    every term active. K = 2 checks the binary path, K >= 3 the multi-class
    path. Returns the relative error of check_gradient.
    """
    if r >= d:
        raise ConfigurationError("r must be < d (r={}, d={})".format(r, d))
    if K < 2 or n < K:
        raise ConfigurationError("need K >= 2 and at least K samples")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % K
    rng.shuffle(labels)
    ds = LabeledDataset(
        rng.standard_normal((n, d)), labels, tuple(str(k) for k in range(K))
    )
    hp = Hyperparams(C=1.0, eta=0.5, lam=0.1, rho=0.5, r=r, eps_smooth=eps_smooth)
    part = build_partition(ds.labels, K)
    P0 = rng.standard_normal((d, r)) / math.sqrt(d)
    if K == 2:
        margin = MarginModel(rng.standard_normal(r), rng.standard_normal(1))
    else:
        A = rng.standard_normal((K, K))
        omega = A.dot(A.T) + K * np.eye(K)
        margin = MarginModel(
            rng.standard_normal((r, K)), rng.standard_normal(K), omega / np.trace(omega)
        )
    error, _ = check_gradient(
        lambda P: objective(ds, P, margin, hp, part),
        lambda P: grad_P(ds, P, margin, hp, part),
        P0,
        step,
    )
    logger.debug("Gradient check seed=%s K=%s: relative error %.3e", seed, K, error)
    return error
