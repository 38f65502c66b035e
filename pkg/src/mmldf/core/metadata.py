# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import datetime as dt
import hashlib
import sys
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from mmldf.core.config import mmldf_config

NUMERICAL_STACK = ("numpy", "scipy", "scikit-learn", "psutil", "wrapt")


def get_metadata():
    """Provenance block embedded in model files."""
    return {
        "language": "python",
        "language_version": "{}.{}.{}".format(*sys.version_info[:3]),
        "libraries": get_python_packages_versions(),
        "timestamp": mmldf_config.value("timestamp"),
    }


def get_run_metadata():
    """Like get_metadata but stamped with the wall clock; for reports only."""
    data = get_metadata()
    data["server_time"] = dt.datetime.now(dt.timezone.utc).isoformat()
    return data


def get_python_packages_versions():
    versions = []
    for name in NUMERICAL_STACK:
        try:
            versions.append([name, version(name)])
        except PackageNotFoundError:
            versions.append([name, "Unknown"])
    return versions


def dataset_digest(ds):
    """SHA-256 over the label map, labels and little-endian float64 features."""
    digest = hashlib.sha256()
    digest.update("\x1f".join(str(token) for token in ds.label_map).encode("utf-8"))
    digest.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    digest.update(
        np.asarray(ds.features.shape, dtype="<i8").tobytes()
        + np.ascontiguousarray(ds.features, dtype="<f8").tobytes()
    )
    return digest.hexdigest()
