# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging
import os

import pytest

from mmldf.core.config import MMLDF_PYTHON_VALUES

# Env variables have precedence over Python configs in MmldfConfig.
# Unset all mmldf env variables to prevent interference with tests.

for key in list(os.environ.keys()):
    if key.startswith("MMLDF_"):
        del os.environ[key]


# Override built-in caplog fixture to always be at DEBUG level since we have
# many DEBUG log messages
@pytest.fixture()
def caplog(caplog):
    caplog.set_level(logging.DEBUG)
    yield caplog


class GlobalStateLeak(Exception):
    """Exception raised when a test leaks global state."""


class ConfigLeak(GlobalStateLeak):
    """Exception raised when a test leaks changes in MmldfConfig."""


@pytest.fixture(autouse=True)
def isolate_global_state():
    """
    Isolate global state in MmldfConfig.

    Tolerances and thread counts are read from the global configuration at
    call time, so a leaked override silently changes later tests. This
    fixture acts as a safety net: it fails the test that leaked instead of
    cleaning up behind it.
    """
    try:
        yield
    finally:
        MMLDF_ENV_VARS = {
            key: value for key, value in os.environ.items() if key.startswith("MMLDF_")
        }
        if MMLDF_ENV_VARS:
            raise ConfigLeak("Env config changes: %r" % MMLDF_ENV_VARS)
        if MMLDF_PYTHON_VALUES:
            raise ConfigLeak("Python config changes: %r" % MMLDF_PYTHON_VALUES)
