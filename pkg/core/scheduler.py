# -*- coding: utf-8 -*-
"""
core/scheduler.py

This module defines the TrialScheduler class, a small background executor
for independent experiment trials. It uses a
concurrent.futures.ThreadPoolExecutor to run trials in parallel; the dense
factorizations inside each trial run in numpy/scipy kernels that release
the GIL.

Results are always collected in submission order, which keeps reports
independent of the number of workers.
"""

import logging
import os
from concurrent.futures import Future, ThreadPoolExecutor
from functools import wraps
from typing import Any, Callable, Optional

import psutil

THREADS_ENV_VAR = 'SGM_THREADS'

logger = logging.getLogger(__name__)


def resolve_thread_count(configured: Optional[int] = None) -> int:
    """
    Number of worker threads: ``SGM_THREADS`` if set and valid, then the
    configured value, then the number of logical CPUs.
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
            if value >= 1:
                return value
        except ValueError:
            pass
        logger.warning("Ignoring invalid %s=%r.", THREADS_ENV_VAR, raw)
    if configured is not None and configured >= 1:
        return int(configured)
    return psutil.cpu_count(logical=True) or 1


class TrialScheduler:
    """
    Manages a thread pool for executing experiment trials.

    This class provides a high-level API to submit functions to a
    ThreadPoolExecutor and can be used as a context manager so the pool is
    shut down once a sweep finishes.
    """

    def __init__(self, max_workers: Optional[int] = None):
        """
        Initializes the TrialScheduler and the thread pool.

        Args:
            max_workers (int | None): Pool size; resolved through
                ``resolve_thread_count`` when omitted.
        """
        self.max_workers = resolve_thread_count(max_workers)
        self._executor = ThreadPoolExecutor(max_workers=self.max_workers,
                                            thread_name_prefix='trial')
        logger.info("Trial scheduler started with %d worker(s).",
                    self.max_workers)

    def submit(self, func: Callable, *args: Any, **kwargs: Any) -> Future:
        """
        Submits a function to be executed in the thread pool.

        When a ``context`` keyword (a TrialContext) is passed, start and end
        of the call are logged on the trial's own logger.

        Returns:
            A Future object representing the execution of the callable.
        """
        context = kwargs.get('context')
        label = context.label if context else 'unknown_trial'
        logger.debug(f"Submitting trial '{label}' to the executor.")

        @wraps(func)
        def wrapper(*w_args, **w_kwargs):
            if context is not None:
                context.log_progress("started", logging.DEBUG)
            try:
                return func(*w_args, **w_kwargs)
            finally:
                if context is not None:
                    context.log_progress("finished", logging.DEBUG)

        return self._executor.submit(wrapper, *args, **kwargs)

    def shutdown(self, wait: bool = True):
        """
        Shuts down the thread pool executor.

        Args:
            wait (bool): If True, waits for all pending futures to complete
                         before shutting down.
        """
        try:
            logger.info("Shutting down trial scheduler.")
            self._executor.shutdown(wait=wait)
        except Exception as e:
            logger.error(f"Failed to shut down trial scheduler: {e}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.shutdown(wait=True)
