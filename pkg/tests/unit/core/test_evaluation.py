# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging

import numpy as np
import pytest

from mmldf.core import evaluation
from mmldf.core.dataset import LabeledDataset, SynthSpec, synth_blobs
from mmldf.core.error import (
    ConfigurationError,
    DatasetError,
    DimensionMismatch,
    SingularMatrix,
)
from mmldf.core.evaluation import (
    KNOWN_BENCHMARKS,
    AccuracyRow,
    AccuracyTable,
    ProtocolSpec,
    accuracy,
    convergence_curve,
    correlation_matrix,
    cross_validate,
    reference_check,
    row_norm_profile,
    run_protocol,
    sensitivity_sweep,
    train_linear_svm,
    trial_seeds,
    variant_hyperparams,
)
from mmldf.core.objective import Hyperparams
from mmldf.core.solver import TrainConfig
from tests.compat import SimpleNamespace, mock
from tests.tools import is_non_increasing


def blobs(classes=2, per_class=15, informative=3, noise=5, separation=5.0, seed=0):
    spec = SynthSpec(
        classes=classes,
        samples_per_class=per_class,
        informative_dims=informative,
        noise_dims=noise,
        class_separation=separation,
    )
    return synth_blobs(spec, seed)


def quick_spec(**kwargs):
    kwargs.setdefault("dims", (2,))
    kwargs.setdefault("trials", 1)
    kwargs.setdefault("train_cfg", TrainConfig(max_outer_iters=5))
    return ProtocolSpec(**kwargs)


# Variants


def test_variant_hyperparams():
    hp = Hyperparams(C=2.0, eta=0.5, lam=0.1, rho=0.3)

    assert variant_hyperparams(hp, "full") == hp
    assert variant_hyperparams(hp, "no_rho").rho == 0.0
    reduced = variant_hyperparams(hp, "no_eta_no_rho")
    assert (reduced.eta, reduced.rho, reduced.lam) == (0.0, 0.0, 0.1)
    mmpp = variant_hyperparams(hp, "mmpp")
    assert (mmpp.C, mmpp.eta, mmpp.lam, mmpp.rho) == (2.0, 0.0, 0.0, 0.0)


def test_unknown_variant():
    with pytest.raises(ConfigurationError):
        variant_hyperparams(Hyperparams(), "mmldf-iii")


# Downstream classifier


def test_svm_one_dimensional():
    classifier = train_linear_svm([[-1.0], [1.0]], [0, 1], 1.0)

    assert list(classifier.predict([[-1.0], [1.0]])) == [0, 1]
    assert classifier.W.shape == (1, 1)


def test_svm_one_vs_rest():
    ds = blobs(classes=3, per_class=20, informative=3, noise=0, separation=10.0)

    classifier = train_linear_svm(ds.features, ds.labels, 1.0)

    assert classifier.W.shape == (3, 3)
    assert accuracy(classifier.predict(ds.features), ds.labels) == 100.0
    for trace, grad_norm in zip(classifier.objective_traces, classifier.grad_norms):
        assert is_non_increasing(trace)
        assert grad_norm <= 1e-6


def test_svm_duplicate_rows_match_doubled_C():
    ds = blobs(per_class=10, noise=1, separation=2.0, seed=3)
    doubled = np.vstack([ds.features, ds.features])
    labels = np.concatenate([ds.labels, ds.labels])

    first = train_linear_svm(doubled, labels, 0.5)
    second = train_linear_svm(ds.features, ds.labels, 1.0)

    np.testing.assert_allclose(first.W, second.W, atol=1e-6)
    np.testing.assert_allclose(first.bias, second.bias, atol=1e-6)
    points = blobs(per_class=25, noise=1, separation=2.0, seed=4).features
    np.testing.assert_array_equal(first.predict(points), second.predict(points))


def test_svm_single_class():
    with pytest.raises(DatasetError):
        train_linear_svm([[1.0], [2.0]], [1, 1], 1.0)


def test_svm_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        train_linear_svm([[1.0], [2.0]], [0, 1, 1], 1.0)
    classifier = train_linear_svm([[-1.0], [1.0]], [0, 1], 1.0)
    with pytest.raises(DimensionMismatch):
        classifier.predict([[1.0, 2.0]])


@pytest.mark.parametrize(
    "predictions, labels, expected",
    [([0, 1, 2], [0, 1, 2], 100.0), ([0, 1, 1, 0], [0, 1, 0, 1], 50.0)],
)
def test_accuracy(predictions, labels, expected):
    assert accuracy(predictions, labels) == expected


def test_accuracy_errors():
    with pytest.raises(DatasetError):
        accuracy([], [])
    with pytest.raises(DimensionMismatch):
        accuracy([0, 1], [0])


# Protocol settings and tables


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dims": ()},
        {"dims": (0,)},
        {"trials": 0},
        {"svm_C": 0.0},
        {"cv_grid": {"C": (), "eta": (1.0,), "rho": (1.0,)}},
    ],
)
def test_protocol_spec_validation(kwargs):
    with pytest.raises(ConfigurationError):
        ProtocolSpec(**kwargs)


def test_protocol_spec_defaults():
    spec = ProtocolSpec()

    assert spec.dims == (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    assert spec.trials == 10
    assert spec.cv_grid["C"] == tuple(10.0 ** e for e in range(-5, 2))
    data = spec.to_dict()
    assert data["split"] == "stratified"
    assert data["train"]["outer_tol"] == 1e-5


def test_accuracy_row_statistics():
    row = AccuracyRow("full", 10, None, [80.0, 90.0], seed=0)

    assert row.mean_acc == 85.0
    assert row.std_acc == 5.0
    assert row.trials == 2
    assert AccuracyRow("full", 10, None, [70.0], seed=0).std_acc == 0.0


def test_accuracy_table():
    table = AccuracyTable(
        [
            AccuracyRow("mmpp", 20, None, [60.0], 1),
            AccuracyRow("full", 20, None, [75.0], 1),
            AccuracyRow("full", 10, None, [70.0], 1),
        ]
    )

    assert [row.key for row in table] == [
        ("full", None, 10),
        ("full", None, 20),
        ("mmpp", None, 20),
    ]
    assert table.cell("full", 20).mean_acc == 75.0
    assert table.best().variant == "full"
    assert table.best("mmpp").dim == 20
    assert table.to_csv().splitlines() == [
        "variant,dim,param_value,mean_acc,std_acc,trials,seed",
        "full,10,,70.0,0.0,1,1",
        "full,20,,75.0,0.0,1,1",
        "mmpp,20,,60.0,0.0,1,1",
    ]


def test_accuracy_table_duplicate_cell():
    table = AccuracyTable([AccuracyRow("full", 10, None, [70.0], 1)])

    with pytest.raises(ConfigurationError):
        table.add(AccuracyRow("full", 10, None, [71.0], 1))


def test_accuracy_table_merge():
    table = AccuracyTable([AccuracyRow("full", 10, 0.1, [70.0], 1)])

    table.merge(AccuracyTable([AccuracyRow("full", 10, 1.0, [72.0], 1)]))

    assert len(table) == 2
    assert table.cell("full", 10, 1.0).mean_acc == 72.0


def test_trial_seeds():
    assert trial_seeds(0, 1) == trial_seeds(0, 1)
    assert trial_seeds(0, 1) != trial_seeds(0, 2)
    assert trial_seeds(0, 1) != trial_seeds(1, 1)


# Protocol runs


def test_run_protocol_single_cell():
    ds = blobs()

    table = run_protocol(ds, Hyperparams(), quick_spec(), variant="mmpp")

    assert len(table) == 1
    row = table.cell("mmpp", 2)
    assert row.trials == 1
    assert row.std_acc == 0.0
    assert 0.0 <= row.mean_acc <= 100.0


def test_run_protocol_is_deterministic():
    ds = blobs(classes=3)
    spec = quick_spec(dims=(2, 3), trials=2, seed=7)

    first = run_protocol(ds, Hyperparams(eta=0.1, rho=0.1), spec)
    second = run_protocol(ds, Hyperparams(eta=0.1, rho=0.1), spec)

    assert first == second
    assert len(first) == 2


def test_run_protocol_random_variant():
    ds = blobs()

    table = run_protocol(ds, Hyperparams(), quick_spec(trials=2), variant="random")

    assert table.cell("random", 2).trials == 2


def test_run_protocol_dim_too_large():
    ds = blobs()

    with pytest.raises(ConfigurationError) as excinfo:
        run_protocol(ds, Hyperparams(), quick_spec(dims=(ds.d,)))

    assert "r must be < d" in str(excinfo.value)


def test_run_protocol_with_cross_validation():
    ds = blobs(per_class=12)
    grid = {"C": (0.1, 1.0), "eta": (0.0,), "rho": (0.0,)}
    spec = quick_spec(cv=True, cv_grid=grid, train_count=12)

    table = run_protocol(ds, Hyperparams(), spec)

    assert table.cell("full", 2).trials == 1


def test_cross_validate_single_point():
    ds = blobs()
    grid = {"C": (2.0,), "eta": (0.5,), "rho": (0.25,)}

    with mock.patch.object(evaluation, "fit") as fit:
        point = cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams())

    assert point == (2.0, 0.5, 0.25)
    assert not fit.called


def test_cross_validate_prefers_higher_score():
    ds = blobs()
    grid = {"C": (1e-3, 1e3), "eta": (0.1,), "rho": (0.2,)}

    with mock.patch.object(evaluation, "fit", return_value=(None, None, None)), \
            mock.patch.object(
                evaluation, "_embed_and_score", side_effect=[50.0] * 3 + [80.0] * 3
            ):
        point = cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams())

    assert point == (1e3, 0.1, 0.2)


def test_cross_validate_tie_keeps_smallest_point():
    ds = blobs()
    grid = {"C": (1e3, 1e-3), "eta": (0.1,), "rho": (0.2, 0.1)}

    with mock.patch.object(evaluation, "fit", return_value=(None, None, None)), \
            mock.patch.object(evaluation, "_embed_and_score", return_value=50.0):
        point = cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams())

    assert point == (1e-3, 0.1, 0.1)


def test_cross_validate_mmpp_grid_fixes_regularizers():
    ds = blobs()
    grid = {"C": (1e-3, 1e3), "eta": (0.1, 1.0), "rho": (0.2, 2.0)}

    with mock.patch.object(evaluation, "fit", return_value=(None, None, None)), \
            mock.patch.object(
                evaluation, "_embed_and_score", return_value=50.0
            ) as score:
        point = cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams(), "mmpp")

    assert point == (1e-3, 0.0, 0.0)
    assert score.call_count == 2 * 3


def test_cross_validate_skips_fold_missing_a_class(caplog):
    ds = LabeledDataset(
        np.random.default_rng(0).standard_normal((13, 4)),
        [0] * 6 + [1] * 6 + [2],
        ("0", "1", "2"),
    )
    grid = {"C": (0.1, 1.0), "eta": (0.0,), "rho": (0.0,)}

    with mock.patch.object(evaluation, "fit", return_value=(None, None, None)), \
            mock.patch.object(
                evaluation, "_embed_and_score", return_value=50.0
            ) as score:
        cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams())

    assert score.call_count == 2 * 2
    assert any(
        message == "Skipping fold without every class present"
        for name, level, message in caplog.record_tuples
        if name == "mmldf.core.evaluation" and level == logging.DEBUG
    )


def test_cross_validate_every_fold_skipped():
    ds = LabeledDataset(
        np.random.default_rng(0).standard_normal((12, 4)),
        [0] * 6 + [1] * 6,
        ("0", "1", "2"),
        allow_missing=True,
    )
    grid = {"C": (0.1, 1.0), "eta": (0.0,), "rho": (0.0,)}

    with pytest.raises(DatasetError):
        cross_validate(ds, quick_spec(cv_grid=grid), Hyperparams())


def test_sensitivity_sweep_single_value_matches_protocol():
    ds = blobs()
    spec = quick_spec()
    hp = Hyperparams(eta=0.1)

    sweep = sensitivity_sweep(ds, hp, spec, "C", [2.0])
    direct = run_protocol(ds, hp.replace(C=2.0), spec)

    assert sweep.cell("full", 2, 2.0).accuracies == direct.cell("full", 2).accuracies


def test_sensitivity_sweep_shape():
    ds = blobs()
    spec = quick_spec(dims=(2, 3))

    table = sensitivity_sweep(ds, Hyperparams(), spec, "lambda", [1e-6, 1e-2, 1e2])

    assert len(table) == 6
    assert sorted({row.param_value for row in table}) == [1e-6, 1e-2, 1e2]


def test_sensitivity_sweep_errors():
    ds = blobs()

    with pytest.raises(ConfigurationError):
        sensitivity_sweep(ds, Hyperparams(), quick_spec(), "gamma", [1.0])
    with pytest.raises(ConfigurationError):
        sensitivity_sweep(ds, Hyperparams(), quick_spec(), "C", [])


# Reports


def test_row_norm_profile():
    np.testing.assert_array_equal(row_norm_profile(np.eye(2)), [1.0, 1.0])
    np.testing.assert_array_equal(
        row_norm_profile(np.array([[3.0, 4.0], [0.0, 0.0]])), [5.0, 0.0]
    )


def test_correlation_matrix_identity():
    np.testing.assert_allclose(correlation_matrix(np.eye(3) / 3), np.eye(3))


def test_correlation_matrix_off_diagonal():
    corr = correlation_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]) / 6)

    np.testing.assert_allclose(corr, [[1.0, 0.5], [0.5, 1.0]])


def test_correlation_matrix_zero_diagonal():
    with pytest.raises(SingularMatrix):
        correlation_matrix(np.zeros((2, 2)))


def test_convergence_curve():
    report = SimpleNamespace(objective_trace=[10.0, 5.0, 5.0])

    assert convergence_curve(report) == [(1, 5.0, 0.5), (2, 5.0, 0.0)]


def test_known_benchmarks():
    dna = KNOWN_BENCHMARKS["dna"]

    assert (dna.size, dna.train, dna.dim, dna.classes) == (2000, 100, 180, 3)
    assert dna.test == 1900
    assert len(KNOWN_BENCHMARKS) == 6


@pytest.mark.parametrize(
    "name, mean_acc, variant, expected",
    [
        ("dna", 83.6, "full", "consistent"),
        ("dna", 79.0, "full", "consistent"),
        ("dna", 70.0, "full", "flagged"),
        ("dna", 76.0, "mmpp", "consistent"),
        ("dna", float("nan"), "full", "flagged"),
        ("dna", "n/a", "full", "flagged"),
        ("my_data", 50.0, "full", "unknown"),
    ],
)
def test_reference_check(name, mean_acc, variant, expected):
    assert reference_check(name, mean_acc, variant) == expected
