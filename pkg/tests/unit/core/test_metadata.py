# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import sys
from importlib.metadata import PackageNotFoundError

import numpy as np

import mmldf
from mmldf.core import metadata
from mmldf.core.dataset import LabeledDataset
from mmldf.core.metadata import (
    NUMERICAL_STACK,
    dataset_digest,
    get_metadata,
    get_python_packages_versions,
    get_run_metadata,
)
from tests.compat import mock
from tests.tools import config_values


def test_get_metadata():
    data = get_metadata()

    assert data["language"] == "python"
    assert data["language_version"] == "{}.{}.{}".format(*sys.version_info[:3])
    assert data["timestamp"] is None
    assert [name for name, _ in data["libraries"]] == list(NUMERICAL_STACK)


def test_get_metadata_timestamp_from_config():
    with config_values(timestamp="2024-01-01T00:00:00Z"):
        data = get_metadata()

    assert data["timestamp"] == "2024-01-01T00:00:00Z"


def test_get_run_metadata_adds_server_time():
    data = get_run_metadata()

    assert data["server_time"].endswith("+00:00")


def test_get_python_packages_versions():
    versions = dict(get_python_packages_versions())

    assert versions["numpy"] == np.__version__


def test_get_python_packages_versions_missing():
    with mock.patch.object(metadata, "version", side_effect=PackageNotFoundError):
        versions = get_python_packages_versions()

    assert versions == [[name, "Unknown"] for name in NUMERICAL_STACK]


def test_dataset_digest():
    ds = LabeledDataset(np.array([[1.0, 2.0], [3.0, 4.0]]), [0, 1], ("a", "b"))
    same = LabeledDataset(np.array([[1.0, 2.0], [3.0, 4.0]]), [0, 1], ("a", "b"))
    relabeled = LabeledDataset(np.array([[1.0, 2.0], [3.0, 4.0]]), [1, 0], ("a", "b"))
    reshaped = LabeledDataset(np.array([[1.0], [2.0], [3.0], [4.0]]), [0, 1, 0, 1], ("a", "b"))

    digest = dataset_digest(ds)

    assert len(digest) == 64
    assert digest == dataset_digest(same)
    assert digest != dataset_digest(relabeled)
    assert digest != dataset_digest(reshaped)


def test_package_version_only_in_distribution_metadata():
    # Versions are read from installed distributions, never from the package.
    assert not hasattr(mmldf, "__version__")
