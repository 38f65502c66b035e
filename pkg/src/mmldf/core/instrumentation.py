# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging
import time

import psutil
import wrapt

logger = logging.getLogger(__name__)


def get_rss_in_mb():
    rss_in_bytes = psutil.Process().memory_info().rss
    return rss_in_bytes / (1024 * 1024)


def timed(phase):
    """
    Decorate a method of an object exposing a ``report`` attribute; the wall
    time of every call is added to ``report.phase_seconds[phase]``.
    """

    @wrapt.decorator
    def wrapper(wrapped, instance, args, kwargs):
        start = time.perf_counter()
        try:
            return wrapped(*args, **kwargs)
        finally:
            elapsed = time.perf_counter() - start
            seconds = instance.report.phase_seconds
            seconds[phase] = seconds.get(phase, 0.0) + elapsed

    return wrapper


class PeakMemory(object):
    """Tracks the largest resident set size seen across calls to sample()."""

    __slots__ = ("peak_mb",)

    def __init__(self):
        self.peak_mb = get_rss_in_mb()

    def sample(self):
        value = get_rss_in_mb()
        if value > self.peak_mb:
            self.peak_mb = value
        logger.debug("Process Memory: %s", value)
        return value
