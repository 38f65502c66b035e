# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging
import math
import time

import numpy as np
from scipy import optimize

from mmldf.core.error import (
    ConfigurationError,
    DatasetError,
    DimensionMismatch,
    EmptyClassError,
    SingularMatrix,
)
from mmldf.core.graph import SCATTER_CONVENTION, build_partition, scatter_value
from mmldf.core.instrumentation import PeakMemory, timed
from mmldf.core.lbfgs import LbfgsConfig, minimize
from mmldf.core.numerics import psd_inv, psd_sqrt, solve_spd
from mmldf.core.objective import (
    ACTIVATION_RULES,
    MARGIN_BINARY,
    MARGIN_MULTI,
    MarginModel,
    ProjectionModel,
    as_matrix,
    correlation_penalty,
    grad_P,
    multi_gaps,
    objective,
    predict_margin,
)

logger = logging.getLogger(__name__)


class TrainConfig(object):
    __slots__ = (
        "outer_tol",
        "max_outer_iters",
        "seed",
        "active_set_refreshes",
        "safeguard",
        "inner_passes",
        "inner_tol",
        "rescale",
    )

    def __init__(
        self,
        outer_tol=1e-5,
        max_outer_iters=50,
        seed=0,
        active_set_refreshes=3,
        safeguard=True,
        inner_passes=10,
        inner_tol=1e-9,
        rescale=True,
    ):
        self.outer_tol = float(outer_tol)
        self.max_outer_iters = int(max_outer_iters)
        self.seed = int(seed)
        self.active_set_refreshes = int(active_set_refreshes)
        self.safeguard = bool(safeguard)
        self.inner_passes = int(inner_passes)
        self.inner_tol = float(inner_tol)
        self.rescale = bool(rescale)

        if not self.outer_tol > 0.0:
            raise ConfigurationError("outer_tol must be > 0")
        if min(self.max_outer_iters, self.active_set_refreshes, self.inner_passes) < 1:
            raise ConfigurationError(
                "max_outer_iters, active_set_refreshes and inner_passes must be >= 1"
            )
        if self.inner_tol < 0.0:
            raise ConfigurationError("inner_tol must be >= 0")

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return TrainConfig(**values)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: v for k, v in data.items() if k in cls.__slots__})


class TrainReport(object):
    """
    Everything a fit records: the outer objective trace (initial value
    first), per-iteration active-set sizes and the work counters
    ``outer_iters``, ``lbfgs_iters``, ``gradient_evals`` and
    ``objective_evals``.
    """

    __slots__ = (
        "mode",
        "objective_trace",
        "active_set_sizes",
        "outer_iters",
        "lbfgs_iters",
        "gradient_evals",
        "objective_evals",
        "phase_seconds",
        "rejected_updates",
        "converged",
        "train_accuracy",
        "peak_rss_mb",
        "wall_seconds",
    )

    def __init__(self, mode):
        self.mode = mode
        self.objective_trace = []
        self.active_set_sizes = []
        self.outer_iters = 0
        self.lbfgs_iters = 0
        self.gradient_evals = 0
        self.objective_evals = 0
        self.phase_seconds = {}
        self.rejected_updates = {}
        self.converged = False
        self.train_accuracy = None
        self.peak_rss_mb = None
        self.wall_seconds = 0.0

    def __repr__(self):
        return "<TrainReport(mode={}, outer_iters={}, converged={})>".format(
            self.mode, self.outer_iters, self.converged
        )

    @property
    def final_objective(self):
        return self.objective_trace[-1] if self.objective_trace else None

    def to_dict(self):
        data = {name: getattr(self, name) for name in self.__slots__}
        data["objective_trace"] = [float(v) for v in self.objective_trace]
        data["active_set_sizes"] = [int(v) for v in self.active_set_sizes]
        data["phase_seconds"] = dict(sorted(self.phase_seconds.items()))
        data["rejected_updates"] = dict(sorted(self.rejected_updates.items()))
        data["conventions"] = {
            "scatter": SCATTER_CONVENTION,
            "activation": ACTIVATION_RULES[self.mode],
        }
        return data


def init_params(d, r, K, seed):
    """
    Seeded starting point: P ~ N(0, 1) / sqrt(d), zero weights and biases,
    and Omega = I / K for the multi-class path (K >= 3).
    """
    if r >= d:
        raise ConfigurationError("r must be < d (r={}, d={})".format(r, d))
    if r < 1:
        raise ConfigurationError("r must be >= 1")
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((d, r)) / math.sqrt(d)
    if K >= 3:
        margin = MarginModel(np.zeros((r, K)), np.zeros(K), np.eye(K) / K)
    else:
        margin = MarginModel(np.zeros((r, 1)), np.zeros(1))
    return ProjectionModel(P), margin


def transform(P, X):
    P = as_matrix(P)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != P.shape[0]:
        raise DimensionMismatch(
            "model expects d={}, data has shape {}".format(P.shape[0], X.shape)
        )
    return X.dot(P)


def _binary_active(Z, y, w, b):
    return np.flatnonzero(y * (Z.dot(w) + b) - MARGIN_BINARY <= 0.0)


def solve_w_frozen(Z, y, b, C, active):
    """(I + 2C Z_a^T Z_a) w = 2C Z_a^T (y_a - b) over the frozen active rows."""
    Za = Z[active]
    M = np.eye(Z.shape[1]) + 2.0 * C * Za.T.dot(Za)
    return solve_spd(M, 2.0 * C * Za.T.dot(y[active] - b))


def update_w_binary(ds, P, w_in, b, C, refreshes=3):
    y = ds.signs()
    Z = transform(P, ds.features)
    w = np.asarray(w_in, dtype=np.float64).reshape(-1)
    active = _binary_active(Z, y, w, b)
    if active.size == 0:
        return np.zeros_like(w)
    for _ in range(refreshes):
        w = solve_w_frozen(Z, y, b, C, active)
        refreshed = _binary_active(Z, y, w, b)
        if refreshed.size == 0 or np.array_equal(refreshed, active):
            break
        active = refreshed
    return w


def update_b_binary(ds, P, w, b_in):
    y = ds.signs()
    Z = transform(P, ds.features)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    active = _binary_active(Z, y, w, b_in)
    if active.size == 0:
        return float(b_in)
    return float(np.mean(y[active] - Z[active].dot(w)))


def update_P(ds, P_in, margin, hp, part=None, lbfgs_cfg=None):
    """
    Minimize the objective over P with the margin model held fixed. Returns
    the new ProjectionModel and the L-BFGS report.
    """
    P0 = as_matrix(P_in)
    shape = P0.shape
    if part is None:
        part = build_partition(ds.labels, ds.K)

    def oracle(x):
        P = x.reshape(shape)
        return (
            objective(ds, P, margin, hp, part),
            grad_P(ds, P, margin, hp, part).reshape(-1),
        )

    x, report = minimize(oracle, P0.reshape(-1), lbfgs_cfg)
    return ProjectionModel(x.reshape(shape)), report


def _block_system(Z, W, bias, labels, Gamma, hp, m):
    r = W.shape[0]
    scores = Z.dot(W) + bias
    _, mask = multi_gaps(Z, W, bias, labels)

    # Pairs where m is the true class: gap = a^T u - (score_k + 2).
    own_rows, own_cols = np.nonzero(mask & (labels == m)[:, np.newaxis])
    # Pairs where m is the violated wrong class: gap = (score_y - 2) - a^T u.
    wrong_rows = np.flatnonzero(mask[:, m])

    rows = np.concatenate([own_rows, wrong_rows])
    targets = np.concatenate(
        [
            scores[own_rows, own_cols] + MARGIN_MULTI,
            scores[wrong_rows, labels[wrong_rows]] - MARGIN_MULTI,
        ]
    )
    A = np.hstack([Z[rows], np.ones((rows.shape[0], 1))])

    H = 2.0 * hp.C * A.T.dot(A)
    rhs = 2.0 * hp.C * A.T.dot(targets)
    ridge = 1.0
    if Gamma is not None:
        ridge += 2.0 * hp.rho * Gamma[m, m]
        others = [k for k in range(W.shape[1]) if k != m]
        rhs[:r] -= 2.0 * hp.rho * W[:, others].dot(Gamma[others, m])
    H[:r, :r] += ridge * np.eye(r)
    return H, rhs, rows.shape[0]


def update_block_multi(ds, P, W_in, bias_in, Omega, hp, m):
    """
    Exact minimizer of the objective in (w_m, b_m) with the active pairs
    frozen at entry. Without pairs the bias has no curvature, so b_m is held
    and only w_m is solved for.
    """
    W = np.asarray(W_in, dtype=np.float64)
    bias = np.asarray(bias_in, dtype=np.float64).reshape(-1)
    if not 0 <= m < W.shape[1]:
        raise DimensionMismatch("class index {} out of range".format(m))
    Z = transform(P, ds.features)
    Gamma = psd_inv(Omega, hp.omega_ridge) if hp.rho else None
    H, rhs, pairs = _block_system(Z, W, bias, ds.labels, Gamma, hp, m)
    r = W.shape[0]
    if pairs and hp.C > 0.0:
        u = solve_spd(H, rhs)
        return u[:r], float(u[r])
    b_m = float(bias[m])
    w_m = solve_spd(H[:r, :r], rhs[:r] - H[:r, r] * b_m)
    return w_m, b_m


def update_omega(W, omega_ridge):
    """
    Unit-trace task covariance sqrt(W^T W + ridge I) / tr(sqrt(W^T W + ridge I)).
    """
    W = np.asarray(W, dtype=np.float64)
    root = psd_sqrt(W.T.dot(W) + omega_ridge * np.eye(W.shape[1]))
    trace = np.trace(root)
    if not trace > 0.0:
        raise SingularMatrix("W^T W + ridge I is zero; use omega_ridge > 0")
    return root / trace


def rescale_factor(ds, P, margin, hp, part=None):
    """
    Scale s minimizing the objective along (s P, W / s). Scores, active sets
    and the hinge term do not move on that path, so what remains is
    a / s^2 + b s + c s^2 with a the margin-model penalties, b the l2,1 term
    and c the scatter term. Returns 1.0 when the objective does not depend
    on s.
    """
    P = as_matrix(P)
    W = margin.W
    a = 0.5 * float(np.sum(W * W))
    if not margin.is_binary:
        a += correlation_penalty(W, margin.omega, hp.rho, hp.omega_ridge)
    b = hp.lam * float(np.sum(np.sqrt(np.sum(P * P, axis=1))))
    c = 0.0
    if hp.eta:
        if part is None:
            part = build_partition(ds.labels, ds.K)
        c = hp.eta * scatter_value(transform(P, ds.features), part)
    if not a > 0.0 or not (b > 0.0 or c > 0.0):
        return 1.0

    # s^3 times the derivative; increasing on s > 0 from -2a.
    def stationarity(s):
        return 2.0 * c * s ** 4 + b * s ** 3 - 2.0 * a

    lo, hi = 1.0, 1.0
    while stationarity(lo) > 0.0:
        lo *= 0.5
    while stationarity(hi) < 0.0:
        hi *= 2.0
    if lo == hi:
        return lo
    return float(optimize.brentq(stationarity, lo, hi, xtol=1e-14, rtol=1e-12))


def _active_count(ds, P, margin):
    Z = transform(P, ds.features)
    if margin.is_binary:
        return int(_binary_active(Z, ds.signs(), margin.w, margin.b).size)
    _, mask = multi_gaps(Z, margin.W, margin.bias, ds.labels)
    return int(mask.sum())


class _FitState(object):
    """Mutable state of one fit: the current point, its objective and the report."""

    def __init__(self, ds, hp, train_cfg, lbfgs_cfg, part, P, margin):
        self.ds = ds
        self.hp = hp
        self.train_cfg = train_cfg
        self.lbfgs_cfg = lbfgs_cfg
        self.part = part
        self.P = P
        self.margin = margin
        self.report = TrainReport(margin.mode)
        self.value = self.evaluate(P, margin)

    def evaluate(self, P, margin):
        self.report.objective_evals += 1
        return objective(self.ds, P, margin, self.hp, self.part)

    def accept(self, block, P, margin, value=None):
        if value is None:
            value = self.evaluate(P, margin)
        if self.train_cfg.safeguard and value > self.value:
            logger.debug("Rejected %s update: objective %r -> %r", block, self.value, value)
            rejected = self.report.rejected_updates
            rejected[block] = rejected.get(block, 0) + 1
            return False
        self.P, self.margin, self.value = P, margin, value
        return True

    @timed("update_w")
    def update_w(self):
        w = update_w_binary(
            self.ds,
            self.P,
            self.margin.w,
            self.margin.b,
            self.hp.C,
            self.train_cfg.active_set_refreshes,
        )
        self.accept("w", self.P, MarginModel(w, [self.margin.b]))

    @timed("update_b")
    def update_b(self):
        b = update_b_binary(self.ds, self.P, self.margin.w, self.margin.b)
        self.accept("b", self.P, MarginModel(self.margin.W, [b]))

    @timed("update_W")
    def update_blocks(self):
        for m in range(self.ds.K):
            current = self.margin
            w_m, b_m = update_block_multi(
                self.ds, self.P, current.W, current.bias, current.omega, self.hp, m
            )
            W = current.W.copy()
            bias = current.bias.copy()
            W[:, m] = w_m
            bias[m] = b_m
            self.accept("W", self.P, MarginModel(W, bias, current.omega))

    @timed("update_omega")
    def update_omega(self):
        omega = update_omega(self.margin.W, self.hp.omega_ridge)
        self.accept(
            "omega", self.P, MarginModel(self.margin.W, self.margin.bias, omega)
        )

    @timed("update_P")
    def update_P(self):
        P, lbfgs_report = update_P(
            self.ds, self.P, self.margin, self.hp, self.part, self.lbfgs_cfg
        )
        self.report.lbfgs_iters += lbfgs_report.iterations
        self.report.gradient_evals += lbfgs_report.grad_evals
        self.report.objective_evals += lbfgs_report.value_evals
        self.accept("P", P, self.margin)

    @timed("rescale")
    def rescale(self):
        s = rescale_factor(self.ds, self.P, self.margin, self.hp, self.part)
        if s == 1.0:
            return
        margin = MarginModel(self.margin.W / s, self.margin.bias, self.margin.omega)
        self.accept("rescale", ProjectionModel(as_matrix(self.P) * s), margin)

    def update_margin(self):
        """Margin-model blocks repeated until their pass stops paying off."""
        for _ in range(self.train_cfg.inner_passes):
            before = self.value
            if self.margin.is_binary:
                self.update_w()
                self.update_b()
            else:
                self.update_blocks()
                self.update_omega()
            if before - self.value <= self.train_cfg.inner_tol * max(1.0, abs(before)):
                break

    def outer_iteration(self):
        self.update_margin()
        self.update_P()
        if self.train_cfg.rescale:
            self.rescale()


def fit(ds, hp, train_cfg=None, lbfgs_cfg=None):
    """
    Alternating minimization of the full objective. K = 2 runs the binary
    path (w, b, P per outer iteration); K >= 3 the multi-class path (one
    block per class, then Omega, then P). The margin blocks repeat up to
    ``inner_passes`` times per iteration, and with ``rescale`` on each
    iteration ends by moving along (s P, W / s).
    """
    if train_cfg is None:
        train_cfg = TrainConfig()
    if lbfgs_cfg is None:
        lbfgs_cfg = LbfgsConfig()
    if ds.K < 2:
        raise DatasetError("training needs at least 2 classes, got {}".format(ds.K))
    missing = ds.missing_classes()
    if missing:
        raise EmptyClassError(
            "classes {} have no training samples".format(
                [ds.label_map[k] for k in missing]
            )
        )

    start = time.perf_counter()
    memory = PeakMemory()
    part = build_partition(ds.labels, ds.K)
    P, margin = init_params(ds.d, hp.r, ds.K, train_cfg.seed)
    state = _FitState(ds, hp, train_cfg, lbfgs_cfg, part, P, margin)
    report = state.report
    report.objective_trace.append(state.value)
    logger.debug("Starting %s fit: n=%s d=%s r=%s J=%r", report.mode, ds.n, ds.d, hp.r, state.value)

    for _ in range(train_cfg.max_outer_iters):
        previous = state.value
        state.outer_iteration()
        report.outer_iters += 1
        report.objective_trace.append(state.value)
        report.active_set_sizes.append(_active_count(ds, state.P, state.margin))
        memory.sample()
        change = abs(previous - state.value) / max(1.0, abs(previous))
        logger.debug(
            "Outer iteration %s: J=%r relative change %.3e",
            report.outer_iters,
            state.value,
            change,
        )
        if change <= train_cfg.outer_tol:
            report.converged = True
            break
    else:
        logger.warning(
            "Fit stopped after %s outer iterations without converging",
            train_cfg.max_outer_iters,
        )

    predictions = predict_margin(state.P, state.margin, ds.features)
    report.train_accuracy = 100.0 * float(np.mean(predictions == ds.labels))
    report.peak_rss_mb = memory.peak_mb
    report.wall_seconds = time.perf_counter() - start
    return state.P, state.margin, report
