# coding=utf-8
from __future__ import absolute_import, division, print_function, unicode_literals

import logging

import pytest

from mmldf.core import instrumentation
from mmldf.core.instrumentation import PeakMemory, get_rss_in_mb, timed
from tests.compat import SimpleNamespace, mock


class Phases(object):
    def __init__(self):
        self.report = SimpleNamespace(phase_seconds={})
        self.calls = 0

    @timed("work")
    def work(self, value):
        self.calls += 1
        return value * 2

    @timed("fail")
    def fail(self):
        raise RuntimeError("boom")


def test_get_rss_in_mb():
    assert get_rss_in_mb() > 0.0


def test_timed_accumulates_per_phase():
    phases = Phases()

    assert phases.work(3) == 6
    first = phases.report.phase_seconds["work"]
    phases.work(4)

    assert phases.calls == 2
    assert phases.report.phase_seconds["work"] >= first >= 0.0
    assert list(phases.report.phase_seconds) == ["work"]


def test_timed_records_failures():
    phases = Phases()

    with pytest.raises(RuntimeError):
        phases.fail()

    assert "fail" in phases.report.phase_seconds


def test_peak_memory(caplog):
    with mock.patch.object(
        instrumentation, "get_rss_in_mb", side_effect=[10.0, 20.0, 5.0]
    ):
        peak = PeakMemory()
        assert peak.sample() == 20.0
        assert peak.sample() == 5.0

    assert peak.peak_mb == 20.0
    messages = [
        message
        for logger_name, level, message in caplog.record_tuples
        if logger_name == "mmldf.core.instrumentation" and level == logging.DEBUG
    ]
    assert messages == ["Process Memory: 20.0", "Process Memory: 5.0"]
