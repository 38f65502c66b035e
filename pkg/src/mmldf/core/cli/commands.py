# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import argparse
import logging
import os
import sys

from mmldf.core.config import mmldf_config
from mmldf.core.dataset import (
    LabeledDataset,
    SynthSpec,
    apply_standardize,
    fit_standardize,
    parse_csv,
    parse_libsvm,
    synth_blobs,
)
from mmldf.core.error import (
    ConfigurationError,
    DatasetError,
    DimensionMismatch,
    NumericalError,
)
from mmldf.core.evaluation import (
    VARIANTS,
    ProtocolSpec,
    accuracy,
    cross_validate,
    reference_check,
    run_protocol,
    sensitivity_sweep,
    train_linear_svm,
    variant_hyperparams,
)
from mmldf.core.lbfgs import LbfgsConfig
from mmldf.core.metadata import dataset_digest, get_metadata, get_run_metadata
from mmldf.core.objective import Hyperparams, random_gradient_check
from mmldf.core.persistence import (
    ModelFile,
    matrix_to_csv,
    read_model,
    read_text,
    write_json,
    write_model,
    write_text,
)
from mmldf.core.solver import TrainConfig, fit, transform

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

GRADCHECK_TOL = 1e-5


def parse_dims(text):
    """``start:stop:step`` (inclusive stop), a comma list or a single count."""
    try:
        if ":" in text:
            start, stop, step = (int(part) for part in text.split(":"))
            if step < 1:
                raise ValueError(text)
            dims = list(range(start, stop + 1, step))
        else:
            dims = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError("invalid --dims {!r}".format(text))
    if not dims:
        raise ConfigurationError("--dims {!r} selects no dimension".format(text))
    return dims


def parse_values(text):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError("invalid value list {!r}".format(text))


def _label_column(text):
    return int(text) if text.lstrip("-").isdigit() else text


def _data_format(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if path.lower().endswith(".csv") else "libsvm"


def load_dataset(path, fmt=None, label_column="0", header=False, expected_dim=None):
    text = read_text(path)
    if _data_format(path, fmt) == "csv":
        return parse_csv(text, _label_column(label_column), header)
    return parse_libsvm(text, expected_dim)


def _load_args_dataset(args, expected_dim=None):
    if getattr(args, "synth", None):
        return synth_blobs(SynthSpec.from_string(args.synth), args.synth_seed)
    if not args.data:
        raise ConfigurationError("one of --data or --synth is required")
    return load_dataset(
        args.data, args.format, args.label_column, args.header, expected_dim
    )


def align_labels(ds, label_map):
    """Re-express ds labels as indices into a model's label map."""
    position = {token: index for index, token in enumerate(label_map)}
    try:
        labels = [position[ds.label_map[k]] for k in ds.labels]
    except KeyError as exc:
        raise DatasetError("label {} is unknown to the model".format(exc))
    return LabeledDataset(ds.features, labels, label_map, allow_missing=True)


def _hyperparams(args, r):
    return Hyperparams(C=args.C, eta=args.eta, lam=args.lam, rho=args.rho, r=r)


def _train_config(args):
    return TrainConfig(
        outer_tol=args.tol, max_outer_iters=args.max_iters, seed=args.seed
    )


def _report_path(args, path, suffix):
    if args.report:
        return args.report
    return os.path.splitext(path)[0] + suffix


def cmd_train(args):
    ds = _load_args_dataset(args)
    if args.dim >= ds.d:
        raise ConfigurationError("r must be < d (r={}, d={})".format(args.dim, ds.d))
    hp = _hyperparams(args, args.dim)
    stats = fit_standardize(ds) if args.standardize else None
    train = apply_standardize(ds, stats) if stats is not None else ds
    train_cfg = _train_config(args)
    lbfgs_cfg = LbfgsConfig()

    if args.cv:
        spec = ProtocolSpec(
            dims=[args.dim], seed=args.seed, train_cfg=train_cfg, lbfgs_cfg=lbfgs_cfg
        )
        C, eta, rho = cross_validate(train, spec, hp)
        hp = hp.replace(C=C, eta=eta, rho=rho)
        logger.info("Cross-validation selected C=%r eta=%r rho=%r", C, eta, rho)

    P, margin, report = fit(train, hp, train_cfg, lbfgs_cfg)

    provenance = get_metadata()
    provenance["seed"] = args.seed
    provenance["dataset_digest"] = dataset_digest(ds)
    write_model(args.out, ModelFile(P, margin, ds.label_map, stats, hp, provenance))
    write_json(
        _report_path(args, args.out, ".report.json"),
        {
            "report": report.to_dict(),
            "hyperparams": hp.to_dict(),
            "train_config": train_cfg.to_dict(),
            "lbfgs_config": lbfgs_cfg.to_dict(),
            "standardized": stats is not None,
            "metadata": get_run_metadata(),
        },
    )
    print(
        "trained {} model: d={} r={} K={} outer_iters={} objective={!r} "
        "train_accuracy={!r}".format(
            margin.mode,
            ds.d,
            hp.r,
            ds.K,
            report.outer_iters,
            report.final_objective,
            report.train_accuracy,
        )
    )
    return EXIT_OK


def cmd_transform(args):
    if not args.data:
        raise ConfigurationError("--data is required")
    model = read_model(args.model)
    ds = load_dataset(
        args.data, args.format, args.label_column, args.header, model.projection.d
    )
    Z = transform(model.projection, model.prepare(ds.features))
    write_text(args.out, matrix_to_csv(Z))
    print("transformed {} samples to {} dimensions".format(Z.shape[0], Z.shape[1]))
    return EXIT_OK


def evaluate_model(model, train, test, svm_C):
    train = align_labels(train, model.label_map)
    test = align_labels(test, model.label_map)
    classifier = train_linear_svm(
        transform(model.projection, model.prepare(train.features)),
        train.labels,
        svm_C,
        len(model.label_map),
    )
    predictions = classifier.predict(
        transform(model.projection, model.prepare(test.features))
    )
    return accuracy(predictions, test.labels)


def cmd_evaluate(args):
    model = read_model(args.model)
    d = model.projection.d
    train = load_dataset(args.train, args.format, args.label_column, args.header, d)
    test = load_dataset(args.test, args.format, args.label_column, args.header, d)
    acc = evaluate_model(model, train, test, args.svm_C)
    write_json(
        _report_path(args, args.model, ".evaluate.json"),
        {
            "accuracy": acc,
            "svm_C": args.svm_C,
            "train_digest": dataset_digest(train),
            "test_digest": dataset_digest(test),
            "model_digest": model.provenance.get("dataset_digest"),
            "metadata": get_run_metadata(),
        },
    )
    print("accuracy: {!r}".format(acc))
    return EXIT_OK


def cmd_benchmark(args):
    ds = _load_args_dataset(args)
    spec = ProtocolSpec(
        dims=parse_dims(args.dims),
        trials=args.trials,
        train_count=args.train_count,
        seed=args.seed,
        svm_C=args.svm_C,
        cv=args.cv,
        standardize=not args.no_standardize,
        train_cfg=_train_config(args),
    )
    hp = _hyperparams(args, spec.dims[0])
    if args.sweep_param:
        if not args.sweep_values:
            raise ConfigurationError("--sweep-param needs --sweep-values")
        table = sensitivity_sweep(
            ds, hp, spec, args.sweep_param, parse_values(args.sweep_values), args.variant
        )
    else:
        table = run_protocol(ds, hp, spec, args.variant)
    write_text(args.out, table.to_csv())
    if args.report:
        write_json(
            args.report,
            {
                "variant": args.variant,
                "hyperparams": variant_hyperparams(hp, args.variant).to_dict(),
                "protocol": spec.to_dict(),
                "sweep": {"param": args.sweep_param, "values": args.sweep_values},
                "dataset_digest": dataset_digest(ds),
                "metadata": get_run_metadata(),
            },
        )

    for row in table:
        print(
            "{} dim={} {}{:.2f} +/- {:.2f}".format(
                row.variant,
                row.dim,
                "" if row.param_value is None else "value={!r} ".format(row.param_value),
                row.mean_acc,
                row.std_acc,
            )
        )
    if args.reference:
        best = table.best()
        print(
            "reference {}: best mean {:.2f} is {}".format(
                args.reference,
                best.mean_acc,
                reference_check(args.reference, best.mean_acc, args.variant),
            )
        )
    return EXIT_OK


def cmd_gradcheck(args):
    if args.r >= args.d:
        raise ConfigurationError("r must be < d (r={}, d={})".format(args.r, args.d))
    errors = {}
    for label, K in (("binary", 2), ("multiclass", args.K)):
        errors[label] = random_gradient_check(
            args.seed, args.n, args.d, args.r, K, args.eps_smooth
        )
        print("{} max relative gradient error: {:.3e}".format(label, errors[label]))
    if max(errors.values()) <= GRADCHECK_TOL:
        return EXIT_OK
    _error(
        "gradient check failed: max relative error {:.3e} exceeds {:.0e}".format(
            max(errors.values()), GRADCHECK_TOL
        )
    )
    return EXIT_NUMERICAL


def _add_data_arguments(parser, synth=True):
    parser.add_argument("--data", help="LIBSVM or CSV dataset path")
    parser.add_argument("--format", choices=["libsvm", "csv"])
    parser.add_argument("--label-column", default="0")
    parser.add_argument("--header", action="store_true", help="CSV has a header row")
    if synth:
        parser.add_argument(
            "--synth", help="synthetic blobs, e.g. classes=3,per_class=100,noise=44"
        )
        parser.add_argument("--synth-seed", type=int, default=0)


def _add_fit_arguments(parser):
    defaults = Hyperparams()
    parser.add_argument("--C", type=float, default=defaults.C)
    parser.add_argument("--eta", type=float, default=defaults.eta)
    parser.add_argument("--lambda", dest="lam", type=float, default=defaults.lam)
    parser.add_argument("--rho", type=float, default=defaults.rho)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-iters", type=int, default=TrainConfig().max_outer_iters)
    parser.add_argument("--tol", type=float, default=TrainConfig().outer_tol)
    parser.add_argument("--cv", action="store_true", help="cross-validate C, eta, rho")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmldf")
    parser.add_argument(
        "-v", "--verbose", help="increase output verbosity", action="count"
    )

    subparsers = parser.add_subparsers(
        title="subcommands", description="valid subcommands", dest="subparser"
    )
    subparsers.required = True

    train = subparsers.add_parser("train", help="fit a projection and margin model")
    _add_data_arguments(train)
    _add_fit_arguments(train)
    train.add_argument("--dim", type=int, required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--report")
    train.add_argument("--standardize", action="store_true")
    train.set_defaults(handler=cmd_train)

    transform_ = subparsers.add_parser("transform", help="embed a dataset")
    transform_.add_argument("--model", required=True)
    _add_data_arguments(transform_, synth=False)
    transform_.add_argument("--out", required=True)
    transform_.set_defaults(handler=cmd_transform)

    evaluate = subparsers.add_parser("evaluate", help="downstream SVM accuracy")
    evaluate.add_argument("--model", required=True)
    evaluate.add_argument("--train", required=True)
    evaluate.add_argument("--test", required=True)
    evaluate.add_argument("--format", choices=["libsvm", "csv"])
    evaluate.add_argument("--label-column", default="0")
    evaluate.add_argument("--header", action="store_true")
    evaluate.add_argument("--svm-C", dest="svm_C", type=float, default=1.0)
    evaluate.add_argument("--report")
    evaluate.set_defaults(handler=cmd_evaluate)

    benchmark = subparsers.add_parser("benchmark", help="run the evaluation protocol")
    _add_data_arguments(benchmark)
    _add_fit_arguments(benchmark)
    benchmark.add_argument("--dims", default="10:100:10")
    benchmark.add_argument("--trials", type=int, default=10)
    benchmark.add_argument("--train-count", type=int)
    benchmark.add_argument("--variant", choices=sorted(VARIANTS), default="full")
    benchmark.add_argument("--svm-C", dest="svm_C", type=float, default=1.0)
    benchmark.add_argument("--no-standardize", action="store_true")
    benchmark.add_argument("--sweep-param", choices=["C", "lambda", "eta", "rho"])
    benchmark.add_argument("--sweep-values")
    benchmark.add_argument("--reference", help="published benchmark name to compare")
    benchmark.add_argument("--report", help="JSON file recording the protocol")
    benchmark.add_argument("--out", required=True)
    benchmark.set_defaults(handler=cmd_benchmark)

    gradcheck = subparsers.add_parser("gradcheck", help="finite-difference check")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--n", type=int, default=20)
    gradcheck.add_argument("--d", type=int, default=12)
    gradcheck.add_argument("--r", type=int, default=4)
    gradcheck.add_argument("--K", type=int, default=4)
    gradcheck.add_argument("--eps-smooth", dest="eps_smooth", type=float)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    return parser


def _error(message):
    print("mmldf: error: {}".format(message), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose is not None:
        if args.verbose >= 2:
            logging.basicConfig(level=logging.DEBUG)
        else:
            logging.basicConfig(level=logging.INFO)
    else:
        level = str(mmldf_config.value("log_level") or "warning").upper()
        logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    mmldf_config.log()

    try:
        return args.handler(args)
    except NumericalError as exc:
        logger.debug("Numerical failure", exc_info=True)
        _error(exc)
        return EXIT_NUMERICAL
    except (ConfigurationError, DatasetError, DimensionMismatch, OSError) as exc:
        logger.debug("Usage failure", exc_info=True)
        _error(exc)
        return EXIT_USAGE
