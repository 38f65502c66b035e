# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import json
import logging

import numpy as np
import pytest

from mmldf.core.cli import commands
from mmldf.core.cli.commands import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    align_labels,
    evaluate_model,
    load_dataset,
    main,
    parse_dims,
    parse_values,
)
from mmldf.core.dataset import (
    LabeledDataset,
    SynthSpec,
    parse_libsvm,
    serialize_csv,
    serialize_libsvm,
    split,
    synth_blobs,
)
from mmldf.core.error import ConfigurationError, DatasetError, NotPositiveDefinite
from mmldf.core.objective import Hyperparams, MarginModel, ProjectionModel
from mmldf.core.persistence import ModelFile, read_model, write_model
from tests.compat import mock

SYNTH = "classes=2,per_class=20,informative=3,noise=3"


def selection_model(path):
    model = ModelFile(
        ProjectionModel(np.eye(3)[:, :2]),
        MarginModel(np.zeros(2), [0.0]),
        ("0", "1"),
        None,
        Hyperparams(r=2),
        {},
    )
    write_model(path, model)
    return model


@pytest.mark.parametrize(
    "text, dims",
    [("10:30:10", [10, 20, 30]), ("5,7", [5, 7]), ("4", [4]), ("2:5:2", [2, 4])],
)
def test_parse_dims(text, dims):
    assert parse_dims(text) == dims


@pytest.mark.parametrize("text", ["x", "10:5:1", "1:5:0", ""])
def test_parse_dims_invalid(text):
    with pytest.raises(ConfigurationError):
        parse_dims(text)


def test_parse_values():
    assert parse_values("1e-3, 0.5,10") == [1e-3, 0.5, 10.0]
    with pytest.raises(ConfigurationError):
        parse_values("a,b")


def test_load_dataset_by_extension(tmp_path):
    ds = synth_blobs(SynthSpec(samples_per_class=3), seed=0)
    csv_path = tmp_path / "data.csv"
    csv_path.write_text(serialize_csv(ds, header=False))
    libsvm_path = tmp_path / "data.txt"
    libsvm_path.write_text(serialize_libsvm(ds))

    assert load_dataset(str(csv_path)) == ds
    assert load_dataset(str(libsvm_path), expected_dim=ds.d) == ds


def test_align_labels():
    ds = LabeledDataset(np.zeros((2, 1)), [0, 0], ("1",))

    aligned = align_labels(ds, ("0", "1"))

    assert list(aligned.labels) == [1, 1]
    assert aligned.label_map == ("0", "1")
    with pytest.raises(DatasetError):
        align_labels(ds, ("0", "2"))


def test_no_subcommand(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([])

    assert excinfo.value.code == 2


def test_gradcheck(capsys):
    assert main(["gradcheck"]) == EXIT_OK

    out = capsys.readouterr().out
    assert "binary max relative gradient error" in out
    assert "multiclass max relative gradient error" in out


def test_gradcheck_large_smoothing(capsys):
    assert main(["gradcheck", "--eps-smooth", "1", "--K", "3", "--seed", "2"]) == EXIT_OK


def test_gradcheck_failure(capsys):
    with mock.patch.object(commands, "random_gradient_check", return_value=1e-3):
        assert main(["gradcheck"]) == EXIT_NUMERICAL

    assert "gradient check failed" in capsys.readouterr().err


def test_gradcheck_rejects_wide_projection(capsys):
    assert main(["gradcheck", "--d", "12", "--r", "12"]) == EXIT_USAGE

    assert "r must be < d" in capsys.readouterr().err


def test_verbose_configures_debug_logging(capsys):
    with mock.patch("logging.basicConfig") as basic_config:
        main(["-vv", "gradcheck", "--n", "8", "--d", "5", "--r", "2", "--K", "3"])

    basic_config.assert_called_once_with(level=logging.DEBUG)


def test_train_synthetic(tmp_path, capsys):
    out = tmp_path / "model.json"

    code = main(["train", "--synth", SYNTH, "--dim", "2", "--out", str(out)])

    assert code == EXIT_OK
    model = read_model(str(out))
    assert model.projection.P.shape == (6, 2)
    assert model.mode == "binary"
    assert model.stats is None
    report = json.loads((tmp_path / "model.report.json").read_text())
    assert report["report"]["mode"] == "binary"
    assert report["hyperparams"]["r"] == 2
    assert capsys.readouterr().out.startswith("trained binary model: d=6 r=2 K=2")


def test_train_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "first.json", tmp_path / "second.json"]
    for path in paths:
        main(
            ["train", "--synth", SYNTH, "--dim", "2", "--seed", "3", "--standardize",
             "--eta", "0.1", "--out", str(path)]
        )

    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert read_model(str(paths[0])).stats is not None


def test_train_dim_too_large(tmp_path, capsys):
    code = main(
        ["train", "--synth", SYNTH, "--dim", "6", "--out", str(tmp_path / "m.json")]
    )

    assert code == EXIT_USAGE
    assert "r must be < d" in capsys.readouterr().err


def test_train_requires_data(tmp_path, capsys):
    code = main(["train", "--dim", "2", "--out", str(tmp_path / "m.json")])

    assert code == EXIT_USAGE
    assert "--data or --synth" in capsys.readouterr().err


def test_train_missing_file(tmp_path, capsys):
    code = main(
        ["train", "--data", str(tmp_path / "missing.txt"), "--dim", "2",
         "--out", str(tmp_path / "m.json")]
    )

    assert code == EXIT_USAGE


def test_train_numerical_failure(tmp_path, capsys):
    with mock.patch.object(commands, "fit", side_effect=NotPositiveDefinite(0)):
        code = main(
            ["train", "--synth", SYNTH, "--dim", "2", "--out", str(tmp_path / "m.json")]
        )

    assert code == EXIT_NUMERICAL
    assert "mmldf: error: matrix is not positive definite" in capsys.readouterr().err


def test_transform_selection(tmp_path, capsys):
    model_path = str(tmp_path / "model.json")
    selection_model(model_path)
    data = tmp_path / "data.txt"
    data.write_text("0 1:1 2:2 3:3\n1 3:5\n0\n")
    out = tmp_path / "z.csv"

    code = main(["transform", "--model", model_path, "--data", str(data), "--out", str(out)])

    assert code == EXIT_OK
    assert out.read_text() == "1.0,2.0\n0.0,0.0\n0.0,0.0\n"


def test_transform_dimension_mismatch(tmp_path, capsys):
    model_path = str(tmp_path / "model.json")
    selection_model(model_path)
    data = tmp_path / "data.txt"
    data.write_text("0 5:1\n")

    code = main(
        ["transform", "--model", model_path, "--data", str(data),
         "--out", str(tmp_path / "z.csv")]
    )

    assert code == EXIT_USAGE


def test_evaluate_matches_in_process(tmp_path, capsys):
    ds = synth_blobs(
        SynthSpec(samples_per_class=30, informative_dims=3, noise_dims=3,
                  class_separation=8.0),
        seed=1,
    )
    train, test = split(ds, 20, seed=0)
    train_path = tmp_path / "train.txt"
    test_path = tmp_path / "test.txt"
    train_path.write_text(serialize_libsvm(train))
    test_path.write_text(serialize_libsvm(test))
    model_path = tmp_path / "model.json"
    main(["train", "--data", str(train_path), "--dim", "2", "--out", str(model_path)])
    capsys.readouterr()

    code = main(
        ["evaluate", "--model", str(model_path), "--train", str(train_path),
         "--test", str(test_path), "--report", str(tmp_path / "eval.json")]
    )

    assert code == EXIT_OK
    model = read_model(str(model_path))
    expected = evaluate_model(
        model,
        parse_libsvm(train_path.read_text(), ds.d),
        parse_libsvm(test_path.read_text(), ds.d),
        1.0,
    )
    assert capsys.readouterr().out == "accuracy: {!r}\n".format(expected)
    assert expected >= 90.0
    report = json.loads((tmp_path / "eval.json").read_text())
    assert report["accuracy"] == expected
    assert report["model_digest"] == model.provenance["dataset_digest"]


def test_evaluate_writes_report_next_to_model(tmp_path, capsys):
    ds = synth_blobs(SynthSpec(samples_per_class=20, informative_dims=4), seed=2)
    data_path = tmp_path / "data.txt"
    data_path.write_text(serialize_libsvm(ds))
    model_path = tmp_path / "model.json"
    main(["train", "--data", str(data_path), "--dim", "2", "--out", str(model_path)])
    capsys.readouterr()

    code = main(
        ["evaluate", "--model", str(model_path), "--train", str(data_path),
         "--test", str(data_path)]
    )

    assert code == EXIT_OK
    report = json.loads((tmp_path / "model.evaluate.json").read_text())
    assert report["svm_C"] == 1.0
    assert "accuracy: {!r}".format(report["accuracy"]) in capsys.readouterr().out


def test_evaluate_dimension_mismatch(tmp_path, capsys):
    model_path = str(tmp_path / "model.json")
    selection_model(model_path)
    data = tmp_path / "data.txt"
    data.write_text("0 1:1\n1 4:1\n")

    code = main(
        ["evaluate", "--model", model_path, "--train", str(data), "--test", str(data)]
    )

    assert code == EXIT_USAGE


def benchmark_args(tmp_path, *extra):
    return [
        "benchmark",
        "--synth",
        "classes=2,per_class=15,informative=5,noise=30",
        "--trials",
        "1",
        "--max-iters",
        "3",
        "--out",
        str(tmp_path / "table.csv"),
    ] + list(extra)


def test_benchmark_dims(tmp_path, capsys):
    code = main(benchmark_args(tmp_path, "--dims", "10:30:10"))

    assert code == EXIT_OK
    lines = (tmp_path / "table.csv").read_text().splitlines()
    assert lines[0] == "variant,dim,param_value,mean_acc,std_acc,trials,seed"
    assert [line.split(",")[1] for line in lines[1:]] == ["10", "20", "30"]
    assert capsys.readouterr().out.startswith("full dim=10 ")


def test_benchmark_mmpp_report(tmp_path, capsys):
    report_path = tmp_path / "report.json"

    code = main(
        benchmark_args(
            tmp_path, "--dims", "2", "--variant", "mmpp", "--report", str(report_path),
            "--lambda", "0.5", "--eta", "0.5", "--rho", "0.5",
        )
    )

    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    assert report["variant"] == "mmpp"
    hyperparams = report["hyperparams"]
    assert (hyperparams["lambda"], hyperparams["eta"], hyperparams["rho"]) == (0.0, 0.0, 0.0)
    assert report["protocol"]["dims"] == [2]


def test_benchmark_is_deterministic(tmp_path, capsys):
    main(benchmark_args(tmp_path, "--dims", "2,4", "--seed", "5"))
    first = (tmp_path / "table.csv").read_bytes()
    main(benchmark_args(tmp_path, "--dims", "2,4", "--seed", "5"))

    assert (tmp_path / "table.csv").read_bytes() == first


def test_benchmark_sweep(tmp_path, capsys):
    code = main(
        benchmark_args(
            tmp_path, "--dims", "2", "--sweep-param", "C", "--sweep-values", "0.1,1",
            "--reference", "dna",
        )
    )

    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "full dim=2 value=0.1 " in out
    assert "full dim=2 value=1.0 " in out
    assert "reference dna: best mean " in out
    assert len((tmp_path / "table.csv").read_text().splitlines()) == 3


def test_benchmark_sweep_without_values(tmp_path, capsys):
    code = main(benchmark_args(tmp_path, "--dims", "2", "--sweep-param", "C"))

    assert code == EXIT_USAGE
    assert "--sweep-values" in capsys.readouterr().err


def test_transform_requires_data(tmp_path, capsys):
    model_path = str(tmp_path / "model.json")
    selection_model(model_path)

    code = main(["transform", "--model", model_path, "--out", str(tmp_path / "z.csv")])

    assert code == EXIT_USAGE
    assert "--data is required" in capsys.readouterr().err
