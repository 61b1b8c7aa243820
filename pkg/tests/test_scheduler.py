import logging
import os
import sys
import threading

import pytest

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.context import TrialContext, TrialContextFilter
from core.scheduler import THREADS_ENV_VAR, TrialScheduler, resolve_thread_count


def test_thread_count_prefers_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    assert resolve_thread_count(8) == 3


def test_thread_count_uses_configured_value(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    assert resolve_thread_count(2) == 2


def test_invalid_environment_value_is_ignored(monkeypatch, caplog):
    monkeypatch.setenv(THREADS_ENV_VAR, "many")

    with caplog.at_level(logging.WARNING):
        assert resolve_thread_count(5) == 5

    assert THREADS_ENV_VAR in caplog.text


def test_thread_count_defaults_to_cpu_count(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    assert resolve_thread_count(None) >= 1


def test_results_keep_submission_order(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    release = threading.Event()

    def work(value, context=None):
        if value == 0:
            release.wait(timeout=5)
        return value * value

    with TrialScheduler(max_workers=4) as scheduler:
        futures = [
            scheduler.submit(work, i, context=TrialContext(f"job{i}", i))
            for i in range(4)
        ]
        release.set()
        results = [f.result() for f in futures]

    assert results == [0, 1, 4, 9]


def test_exceptions_surface_through_futures(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)

    def boom():
        raise RuntimeError("trial failed")

    with TrialScheduler(max_workers=1) as scheduler:
        future = scheduler.submit(boom)
        with pytest.raises(RuntimeError, match="trial failed"):
            future.result()


def test_trial_context_tags_records(caplog):
    context = TrialContext(label="n10-p0.3-t0", seed=42)

    with caplog.at_level(logging.INFO, logger="trial.n10-p0.3-t0"):
        context.log_progress("sampling done")

    record = caplog.records[-1]
    assert record.trial == "n10-p0.3-t0"
    assert "[seed 42] sampling done" in record.getMessage()


def test_trial_context_filter_is_added_once():
    TrialContext(label="shared", seed=1)
    context = TrialContext(label="shared", seed=2)

    filters = [f for f in context.logger.filters
               if isinstance(f, TrialContextFilter)]
    assert len(filters) == 1
