# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from mmldf.core.config import mmldf_config
from mmldf.core.dataset import (
    apply_standardize,
    fit_standardize,
    kfold_indices,
    split_indices,
)
from mmldf.core.error import (
    ConfigurationError,
    DatasetError,
    DimensionMismatch,
    EmptyClassError,
    SingularMatrix,
)
from mmldf.core.lbfgs import LbfgsConfig
from mmldf.core.numerics import solve_spd
from mmldf.core.solver import TrainConfig, fit, transform

logger = logging.getLogger(__name__)

# Hyperparameters zeroed by each protocol variant. ``random`` fits nothing
# and uses a seeded Gaussian projection.
VARIANTS = {
    "full": (),
    "no_rho": ("rho",),
    "no_eta_no_rho": ("eta", "rho"),
    "mmpp": ("lam", "eta", "rho"),
    "random": (),
}

SWEEP_PARAMS = {"C": "C", "lambda": "lam", "eta": "eta", "rho": "rho"}

DEFAULT_GRID_VALUES = tuple(10.0 ** e for e in range(-5, 2))

TABLE_COLUMNS = (
    "variant",
    "dim",
    "param_value",
    "mean_acc",
    "std_acc",
    "trials",
    "seed",
)

SVM_MAX_ITERS = 100
SVM_GRAD_TOL = 1e-9
ARMIJO_C1 = 1e-4


def variant_hyperparams(hp, variant):
    if variant not in VARIANTS:
        raise ConfigurationError(
            "unknown variant {!r}; expected one of {}".format(
                variant, ", ".join(sorted(VARIANTS))
            )
        )
    return hp.replace(**{name: 0.0 for name in VARIANTS[variant]})


class LinearClassifier(object):
    """
    Linear decision functions in the embedded space. One column of ``W``
    for a binary problem (positive score -> class 1), one column per class
    for one-vs-rest (argmax).
    """

    __slots__ = ("W", "bias", "num_classes", "objective_traces", "grad_norms")

    def __init__(self, W, bias, num_classes, objective_traces=(), grad_norms=()):
        self.W = np.asarray(W, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64).reshape(-1)
        self.num_classes = num_classes
        self.objective_traces = list(objective_traces)
        self.grad_norms = list(grad_norms)

    def __repr__(self):
        return "<LinearClassifier(r={}, classes={})>".format(
            self.W.shape[0], self.num_classes
        )

    def decision_function(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.W.shape[0]:
            raise DimensionMismatch(
                "classifier expects {} columns, got shape {}".format(
                    self.W.shape[0], Z.shape
                )
            )
        return Z.dot(self.W) + self.bias

    def predict(self, Z):
        scores = self.decision_function(Z)
        if self.W.shape[1] == 1:
            return (scores[:, 0] >= 0.0).astype(np.intp)
        return np.argmax(scores, axis=1)


def _svm_terms(A, y, u, C, r):
    violation = np.minimum(0.0, y * A.dot(u) - 1.0)
    active = violation < 0.0
    value = 0.5 * u[:r].dot(u[:r]) + C * violation.dot(violation)
    grad = 2.0 * C * A.T.dot(violation * y)
    grad[:r] += u[:r]
    return value, grad, active


def _binary_svm(Z, y, C):
    """
    Quadratic-hinge SVM in (w, b) by generalized Newton steps: the closed
    form over the current violating set, with Armijo backtracking.
    """
    n, r = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    u = np.zeros(r + 1)
    value, grad, active = _svm_terms(A, y, u, C, r)
    trace = [value]
    for _ in range(SVM_MAX_ITERS):
        if np.max(np.abs(grad)) <= SVM_GRAD_TOL:
            break
        Aa = A[active]
        H = 2.0 * C * Aa.T.dot(Aa)
        H[:r, :r] += np.eye(r)
        rhs = 2.0 * C * Aa.T.dot(y[active])
        if active.any() and C > 0.0:
            target = solve_spd(H, rhs)
        else:
            target = u.copy()
            target[:r] = solve_spd(H[:r, :r], rhs[:r] - H[:r, r] * u[r])
        direction = target - u
        slope = grad.dot(direction)
        if not slope < 0.0:
            break
        step = 1.0
        while True:
            candidate = u + step * direction
            new_value, new_grad, new_active = _svm_terms(A, y, candidate, C, r)
            if new_value <= value + ARMIJO_C1 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if new_value > value:
            break
        u, value, grad, active = candidate, new_value, new_grad, new_active
        trace.append(value)
    return u[:r], float(u[r]), trace, float(np.max(np.abs(grad)))


def train_linear_svm(Z, labels, C, num_classes=None):
    """
    Downstream linear classifier: binary quadratic-hinge SVM for two
    classes, one-vs-rest for three or more.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if Z.ndim != 2 or Z.shape[0] != labels.shape[0]:
        raise DimensionMismatch(
            "{} labels for data of shape {}".format(labels.shape[0], Z.shape)
        )
    if np.unique(labels).shape[0] < 2:
        raise DatasetError("cannot train a classifier on single-class input")
    if num_classes is None:
        num_classes = int(labels.max()) + 1

    if num_classes == 2:
        tasks = [np.where(labels == 1, 1.0, -1.0)]
    else:
        tasks = [np.where(labels == k, 1.0, -1.0) for k in range(num_classes)]

    columns, biases, traces, grad_norms = [], [], [], []
    for y in tasks:
        w, b, trace, grad_norm = _binary_svm(Z, y, C)
        columns.append(w)
        biases.append(b)
        traces.append(trace)
        grad_norms.append(grad_norm)
    return LinearClassifier(
        np.column_stack(columns), biases, num_classes, traces, grad_norms
    )


def accuracy(predictions, labels):
    predictions = np.asarray(predictions).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if predictions.shape != labels.shape:
        raise DimensionMismatch(
            "{} predictions for {} labels".format(predictions.shape[0], labels.shape[0])
        )
    if labels.size == 0:
        raise DatasetError("accuracy of an empty prediction set is undefined")
    return 100.0 * float(np.count_nonzero(predictions == labels)) / labels.shape[0]


class ProtocolSpec(object):
    """
    Settings of one evaluation protocol: reduced dimensions, trial count,
    training-split size, downstream SVM C and the optional CV grid.
    """

    __slots__ = (
        "dims",
        "trials",
        "train_count",
        "seed",
        "svm_C",
        "cv",
        "cv_grid",
        "folds",
        "standardize",
        "train_cfg",
        "lbfgs_cfg",
    )

    def __init__(
        self,
        dims=tuple(range(10, 101, 10)),
        trials=10,
        train_count=None,
        seed=0,
        svm_C=1.0,
        cv=False,
        cv_grid=None,
        folds=3,
        standardize=True,
        train_cfg=None,
        lbfgs_cfg=None,
    ):
        self.dims = tuple(int(dim) for dim in dims)
        self.trials = int(trials)
        self.train_count = None if train_count is None else int(train_count)
        self.seed = int(seed)
        self.svm_C = float(svm_C)
        self.cv = bool(cv)
        if cv_grid is None:
            cv_grid = {name: DEFAULT_GRID_VALUES for name in ("C", "eta", "rho")}
        self.cv_grid = {
            name: tuple(sorted(float(v) for v in cv_grid[name]))
            for name in ("C", "eta", "rho")
        }
        self.folds = int(folds)
        self.standardize = bool(standardize)
        self.train_cfg = train_cfg if train_cfg is not None else TrainConfig()
        self.lbfgs_cfg = lbfgs_cfg if lbfgs_cfg is not None else LbfgsConfig()

        if not self.dims or min(self.dims) < 1:
            raise ConfigurationError("dims must be a non-empty list of positive counts")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.svm_C > 0.0:
            raise ConfigurationError("svm_C must be > 0")
        if any(not values for values in self.cv_grid.values()):
            raise ConfigurationError("every cv_grid list must be non-empty")

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "trials": self.trials,
            "train_count": self.train_count,
            "seed": self.seed,
            "svm_C": self.svm_C,
            "cv": self.cv,
            "cv_grid": {k: list(v) for k, v in sorted(self.cv_grid.items())},
            "folds": self.folds,
            "standardize": self.standardize,
            "split": "stratified",
            "classifier": "linear SVM, quadratic hinge",
            "train": self.train_cfg.to_dict(),
            "lbfgs": self.lbfgs_cfg.to_dict(),
        }


class AccuracyRow(object):
    __slots__ = ("variant", "dim", "param_value", "accuracies", "seed")

    def __init__(self, variant, dim, param_value, accuracies, seed):
        self.variant = variant
        self.dim = dim
        self.param_value = param_value
        self.accuracies = tuple(accuracies)
        self.seed = seed

    @property
    def key(self):
        return (self.variant, self.param_value, self.dim)

    @property
    def trials(self):
        return len(self.accuracies)

    @property
    def mean_acc(self):
        return float(np.mean(self.accuracies))

    @property
    def std_acc(self):
        # Population deviation: 0 for a single trial.
        return float(np.std(self.accuracies))


def _sort_key(row):
    variant, param_value, dim = row.key
    return (variant, -math.inf if param_value is None else param_value, dim)


class AccuracyTable(object):
    """Mean and deviation of test accuracy (percent) per (variant, value, dim)."""

    def __init__(self, rows=()):
        self._rows = {}
        for row in rows:
            self.add(row)

    def __len__(self):
        return len(self._rows)

    def __iter__(self):
        return iter(self.rows)

    def __eq__(self, other):
        if not isinstance(other, AccuracyTable):
            return NotImplemented
        return self.to_csv() == other.to_csv()

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    @property
    def rows(self):
        return sorted(self._rows.values(), key=_sort_key)

    def add(self, row):
        if row.key in self._rows:
            raise ConfigurationError("duplicate table cell {!r}".format(row.key))
        self._rows[row.key] = row

    def merge(self, other):
        for row in other.rows:
            self.add(row)
        return self

    def cell(self, variant, dim, param_value=None):
        return self._rows[(variant, param_value, dim)]

    def best(self, variant=None):
        rows = [row for row in self.rows if variant is None or row.variant == variant]
        return max(rows, key=lambda row: row.mean_acc) if rows else None

    def to_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [
                    row.variant,
                    row.dim,
                    "" if row.param_value is None else repr(row.param_value),
                    repr(row.mean_acc),
                    repr(row.std_acc),
                    row.trials,
                    row.seed,
                ]
            )
        return out.getvalue()


def trial_seeds(seed, trial):
    """Independent (split, fit) seeds derived from the protocol seed and trial."""
    state = np.random.SeedSequence([seed, trial]).generate_state(2)
    return int(state[0]), int(state[1])


def random_projection(d, r, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((d, r)) / math.sqrt(d)


def _train_count(ds, spec):
    if spec.train_count is not None:
        return spec.train_count
    return ds.n // 2


def _embed_and_score(train, test, P, svm_C, num_classes):
    classifier = train_linear_svm(
        transform(P, train.features), train.labels, svm_C, num_classes
    )
    return accuracy(classifier.predict(transform(P, test.features)), test.labels)


def _run_trial(ds, hp, spec, variant, dim, trial):
    split_seed, fit_seed = trial_seeds(spec.seed, trial)
    train_idx, test_idx = split_indices(ds.labels, _train_count(ds, spec), split_seed)
    train = ds.subset(train_idx)
    test = ds.subset(test_idx, allow_missing=True)
    if spec.standardize:
        stats = fit_standardize(train)
        train, test = apply_standardize(train, stats), apply_standardize(test, stats)

    trial_hp = variant_hyperparams(hp.replace(r=dim), variant)
    if variant == "random":
        P = random_projection(ds.d, dim, fit_seed)
    else:
        if spec.cv:
            C, eta, rho = cross_validate(train, spec, trial_hp, variant)
            trial_hp = variant_hyperparams(trial_hp.replace(C=C, eta=eta, rho=rho), variant)
        P, _, report = fit(
            train, trial_hp, spec.train_cfg.replace(seed=fit_seed), spec.lbfgs_cfg
        )
        logger.debug(
            "Trial %s dim %s: %s outer iterations, J=%r",
            trial,
            dim,
            report.outer_iters,
            report.final_objective,
        )
    return _embed_and_score(train, test, P, spec.svm_C, ds.K)


def run_protocol(ds, hp, spec, variant="full", param_value=None):
    """
    For every (dim, trial): seeded split, standardization on the training
    part, fit, embedding of both parts, downstream SVM, test accuracy.
    Trials run on a thread pool sized by the ``threads`` setting.
    """
    variant_hyperparams(hp, variant)
    if max(spec.dims) >= ds.d:
        raise ConfigurationError(
            "r must be < d: dims up to {} for d={}".format(max(spec.dims), ds.d)
        )
    tasks = [(dim, trial) for dim in spec.dims for trial in range(spec.trials)]
    threads = mmldf_config.value("threads")
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {
            task: executor.submit(_run_trial, ds, hp, spec, variant, task[0], task[1])
            for task in tasks
        }
        results = {task: future.result() for task, future in futures.items()}

    table = AccuracyTable()
    for dim in spec.dims:
        accuracies = [results[(dim, trial)] for trial in range(spec.trials)]
        table.add(AccuracyRow(variant, dim, param_value, accuracies, spec.seed))
        logger.info(
            "%s dim=%s: %.2f +/- %.2f",
            variant,
            dim,
            np.mean(accuracies),
            np.std(accuracies),
        )
    return table


def _grid_points(spec, variant):
    zeroed = VARIANTS[variant]
    axes = []
    for name in ("C", "eta", "rho"):
        axes.append((0.0,) if name in zeroed else spec.cv_grid[name])
    return list(itertools.product(*axes))


def cross_validate(train_ds, spec, hp, variant="full"):
    """
    Stratified k-fold selection of (C, eta, rho) by mean fold accuracy.
    Grid points are visited in lexicographic order and only a strictly
    better score replaces the incumbent. Folds whose training part lacks a
    class are skipped.
    """
    points = _grid_points(spec, variant)
    if len(points) == 1:
        return points[0]

    folds = []
    for fit_idx, val_idx in kfold_indices(train_ds.labels, spec.folds, spec.seed):
        try:
            fold_train = train_ds.subset(fit_idx)
        except EmptyClassError:
            fold_train = None
        if fold_train is None or val_idx.size == 0:
            logger.debug("Skipping fold without every class present")
            continue
        folds.append((fold_train, train_ds.subset(val_idx, allow_missing=True)))
    if not folds:
        raise DatasetError("every cross-validation fold is missing a class")

    best_point, best_score = None, -math.inf
    for point in points:
        C, eta, rho = point
        point_hp = hp.replace(C=C, eta=eta, rho=rho)
        scores = []
        for fold_train, fold_val in folds:
            P, _, _ = fit(fold_train, point_hp, spec.train_cfg, spec.lbfgs_cfg)
            scores.append(
                _embed_and_score(fold_train, fold_val, P, spec.svm_C, train_ds.K)
            )
        score = float(np.mean(scores))
        logger.debug("CV point C=%r eta=%r rho=%r: %.3f", C, eta, rho, score)
        if score > best_score:
            best_point, best_score = point, score
    return best_point


def sensitivity_sweep(ds, hp, spec, param, values, variant="full"):
    if param not in SWEEP_PARAMS:
        raise ConfigurationError(
            "unknown sweep parameter {!r}; expected one of {}".format(
                param, ", ".join(sorted(SWEEP_PARAMS))
            )
        )
    values = [float(v) for v in values]
    if not values:
        raise ConfigurationError("sweep values must be non-empty")
    attribute = SWEEP_PARAMS[param]
    table = AccuracyTable()
    for value in values:
        table.merge(
            run_protocol(
                ds, hp.replace(**{attribute: value}), spec, variant, param_value=value
            )
        )
    return table


def row_norm_profile(P):
    P = np.asarray(getattr(P, "P", P), dtype=np.float64)
    return np.sqrt(np.sum(P * P, axis=1))


def correlation_matrix(Omega):
    Omega = np.asarray(Omega, dtype=np.float64)
    diagonal = np.diag(Omega)
    if np.any(diagonal <= 0.0):
        raise SingularMatrix("correlation needs a positive diagonal")
    scale = np.sqrt(diagonal)
    corr = np.clip(Omega / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return 0.5 * (corr + corr.T)


def convergence_curve(report):
    """(iteration, objective, relative change) for every outer iteration."""
    trace = report.objective_trace
    return [
        (t, trace[t], abs(trace[t - 1] - trace[t]) / max(1.0, abs(trace[t - 1])))
        for t in range(1, len(trace))
    ]


class Benchmark(object):
    __slots__ = ("name", "size", "train", "dim", "classes", "reference", "mmpp")

    def __init__(self, name, size, train, dim, classes, reference, mmpp):
        self.name = name
        self.size = size
        self.train = train
        self.dim = dim
        self.classes = classes
        self.reference = reference
        self.mmpp = mmpp

    @property
    def test(self):
        return self.size - self.train


# Public benchmark protocols: sample count, training split, features,
# classes and the published mean accuracy (percent) of the full method and
# of its pure max-margin reduction.
KNOWN_BENCHMARKS = {
    b.name: b
    for b in (
        Benchmark("urban_land_cover", 168, 42, 148, 9, 75.2, 70.6),
        Benchmark("cnae9", 1080, 100, 857, 9, 83.6, 74.4),
        Benchmark("dna", 2000, 100, 180, 3, 83.6, 76.0),
        Benchmark("glioma", 50, 10, 4434, 4, 54.0, 50.5),
        Benchmark("lsvt", 126, 10, 309, 2, 77.2, 72.5),
        Benchmark("epsilon", 5000, 1000, 2000, 2, 78.2, 70.6),
    )
}

REFERENCE_TOLERANCE = 5.0


def reference_check(name, mean_acc, variant="full"):
    """
    Compare a measured mean accuracy with the published one. Returns
    ``"consistent"`` within five points, ``"flagged"`` otherwise and
    ``"unknown"`` for unlisted benchmarks. Never raises.
    """
    benchmark = KNOWN_BENCHMARKS.get(name)
    if benchmark is None:
        return "unknown"
    reference = benchmark.mmpp if variant == "mmpp" else benchmark.reference
    try:
        deviation = abs(float(mean_acc) - reference)
    except (TypeError, ValueError):
        return "flagged"
    if deviation <= REFERENCE_TOLERANCE:
        return "consistent"
    logger.info(
        "Accuracy %r on %s deviates from the published %r", mean_acc, name, reference
    )
    return "flagged"
