# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

from mmldf.core.config import MmldfConfig
from mmldf.core.dataset import (
    LabeledDataset,
    SynthSpec,
    apply_standardize,
    fit_standardize,
    parse_csv,
    parse_libsvm,
    split,
    standardize_matrix,
    synth_blobs,
)
from mmldf.core.evaluation import (
    ProtocolSpec,
    cross_validate,
    run_protocol,
    sensitivity_sweep,
    train_linear_svm,
)
from mmldf.core.lbfgs import LbfgsConfig
from mmldf.core.objective import Hyperparams
from mmldf.core.solver import TrainConfig, fit, transform

__all__ = [
    "Config",
    "Embedder",
    "Hyperparams",
    "LabeledDataset",
    "LbfgsConfig",
    "ProtocolSpec",
    "SynthSpec",
    "TrainConfig",
    "apply_standardize",
    "cross_validate",
    "fit",
    "fit_standardize",
    "parse_csv",
    "parse_libsvm",
    "run_protocol",
    "sensitivity_sweep",
    "split",
    "synth_blobs",
    "train_linear_svm",
    "transform",
]


class Config(MmldfConfig):
    pass


class Embedder(object):
    """
    Fit/transform wrapper: learns the projection on a LabeledDataset and
    embeds raw feature matrices.

        embedder = Embedder(Hyperparams(r=5, eta=0.1)).fit(train)
        Z = embedder.transform(test.features)
    """

    def __init__(self, hp=None, train_cfg=None, lbfgs_cfg=None, standardize=True):
        self.hp = hp if hp is not None else Hyperparams()
        self.train_cfg = train_cfg
        self.lbfgs_cfg = lbfgs_cfg
        self.standardize = standardize
        self.stats = None
        self.projection = None
        self.margin = None
        self.report = None

    def fit(self, ds):
        if self.standardize:
            self.stats = fit_standardize(ds)
            ds = apply_standardize(ds, self.stats)
        self.projection, self.margin, self.report = fit(
            ds, self.hp, self.train_cfg, self.lbfgs_cfg
        )
        return self

    def transform(self, X):
        if self.projection is None:
            raise RuntimeError("Embedder.fit must be called before transform")
        if self.stats is not None:
            X = standardize_matrix(X, self.stats)
        return transform(self.projection, X)
