# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import csv
import io
import json
import logging

import numpy as np

from mmldf.core.dataset import StandardizationStats, standardize_matrix
from mmldf.core.error import ConfigurationError, DimensionMismatch
from mmldf.core.objective import Hyperparams, MarginModel, ProjectionModel

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _matrix(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


class ModelFile(object):
    """
    Everything needed to reuse a trained model: projection, margin model,
    label map, standardization and hyperparameters, plus provenance.
    """

    __slots__ = ("projection", "margin", "label_map", "stats", "hp", "provenance")

    def __init__(self, projection, margin, label_map, stats, hp, provenance):
        self.projection = projection
        self.margin = margin
        self.label_map = tuple(label_map)
        self.stats = stats
        self.hp = hp
        self.provenance = dict(provenance)
        if margin.W.shape[0] != projection.r:
            raise DimensionMismatch("margin model and projection disagree on r")
        if stats is not None and stats.d != projection.d:
            raise DimensionMismatch("standardization and projection disagree on d")

    @property
    def mode(self):
        return self.margin.mode

    @property
    def shapes(self):
        return {
            "d": self.projection.d,
            "r": self.projection.r,
            "K": len(self.label_map),
        }

    def prepare(self, X):
        """Apply the stored standardization, if any, to raw features."""
        if self.stats is None:
            return np.asarray(X, dtype=np.float64)
        return standardize_matrix(X, self.stats)

    def to_dict(self):
        omega = self.margin.omega
        return {
            "format_version": FORMAT_VERSION,
            "mode": self.mode,
            "shapes": self.shapes,
            "P": _matrix(self.projection.P),
            "W": _matrix(self.margin.W),
            "bias": [float(v) for v in self.margin.bias],
            "Omega": None if omega is None else _matrix(omega),
            "label_map": list(self.label_map),
            "standardization": None if self.stats is None else self.stats.to_dict(),
            "hyperparams": self.hp.to_dict(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data):
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise ConfigurationError(
                "unsupported model format_version {!r}".format(version)
            )
        shapes = data["shapes"]
        P = np.array(data["P"], dtype=np.float64).reshape(shapes["d"], shapes["r"])
        columns = 1 if data["mode"] == "binary" else shapes["K"]
        W = np.array(data["W"], dtype=np.float64).reshape(shapes["r"], columns)
        omega = data.get("Omega")
        stats = data.get("standardization")
        return cls(
            ProjectionModel(P),
            MarginModel(W, data["bias"], omega),
            data["label_map"],
            None if stats is None else StandardizationStats.from_dict(stats),
            Hyperparams.from_dict(data["hyperparams"]),
            data["provenance"],
        )


def dumps(data):
    # Shortest round-trip float repr, sorted keys: identical inputs give
    # identical bytes.
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(data))
    logger.debug("Wrote %s", path)


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_model(path, model):
    write_json(path, model.to_dict())


def read_model(path):
    try:
        return ModelFile.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError("invalid model file {}: {}".format(path, exc))


def matrix_to_csv(M):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in np.asarray(M, dtype=np.float64):
        writer.writerow([repr(float(v)) for v in row])
    return out.getvalue()


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.debug("Wrote %s", path)


def read_text(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()
