# -*- coding: utf-8 -*-
"""
core/experiment.py

Synthetic recovery experiments: for every (|V|, p, M) cell and trial,
generate a random complex and ground truth, draw M full-model samples, run
``infer`` on the edge block, and record F1 per pruning threshold and NMSE.
Trials run on a TrialScheduler; the report is ordered by (cell, trial), so
it does not depend on the number of workers.
"""

import hashlib
import itertools
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.context import TrialContext
from core.errors import SgmError
from core.evaluation import f1_score, generate_ground_truth, nmse
from core.inference import (InferenceOptions, infer,
                            sample_covariance_from_chunks)
from core.scheduler import TrialScheduler
from core.sgm_model import assemble_full_precision, iter_samples
from core.simplicial_complex import random_complex
from utils.artifacts import read_rows_csv, write_json, write_rows_csv

logger = logging.getLogger(__name__)

TRIALS_FILE = 'trials.csv'
SUMMARY_FILE = 'summary.csv'
REPORT_FILE = 'report.json'


@dataclass
class ExperimentConfig:
    """Grid and parameter law of a recovery experiment."""
    base_seed: int
    vertex_counts: Tuple[int, ...] = (10, 30, 50)
    fill_fractions: Tuple[float, ...] = (0.10, 0.30, 0.50)
    edge_probability: float = 0.3
    trials: int = 20
    samples: int = 50000
    # M values to sweep; defaults to (samples, )
    sample_counts: Optional[Tuple[int, ...]] = None
    d_range: Tuple[float, float] = (0.2, 1.0)
    k_margin: float = 1.5
    thresholds: Tuple[float, ...] = (0.01, 0.05, 0.1)
    max_regenerations: int = 100
    inference: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.base_seed, bool) or not isinstance(
                self.base_seed, (int, np.integer)):
            raise ValueError("base_seed must be an integer, got %r." %
                             (self.base_seed, ))
        self.vertex_counts = tuple(int(n) for n in self.vertex_counts)
        self.fill_fractions = tuple(float(p) for p in self.fill_fractions)
        self.sample_counts = tuple(
            int(m) for m in (self.sample_counts or (self.samples, )))
        self.d_range = (float(self.d_range[0]), float(self.d_range[1]))
        self.thresholds = tuple(sorted(float(t) for t in self.thresholds))
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge_probability must be in [0, 1].")
        if any(not 0.0 <= p <= 1.0 for p in self.fill_fractions):
            raise ValueError("fill_fractions must lie in [0, 1].")
        if any(n < 3 for n in self.vertex_counts):
            raise ValueError("vertex_counts must be at least 3.")
        if self.trials < 1:
            raise ValueError("trials must be at least 1.")
        if any(m < 1 for m in self.sample_counts):
            raise ValueError("sample counts must be at least 1.")
        if not 0 < self.d_range[0] <= self.d_range[1]:
            raise ValueError("d_range must be a positive interval.")

    @classmethod
    def from_mapping(
            cls,
            data: Dict[str, Any],
            defaults: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """
        Merge a config file mapping over ``defaults`` (e.g. the [experiment]
        section of config.ini). ``base_seed`` must come from ``data``.
        """
        if 'base_seed' not in data:
            raise ValueError("Experiment configs must set 'base_seed'.")
        merged = dict(defaults or {})
        merged.update(data)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(merged) - known)
        if unknown:
            logger.warning("Ignoring unknown experiment keys: %s",
                           ', '.join(unknown))
        return cls(**{k: v for k, v in merged.items() if k in known})

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ('vertex_counts', 'fill_fractions', 'sample_counts',
                    'd_range', 'thresholds'):
            data[key] = list(data[key])
        return data

    def inference_options(self) -> InferenceOptions:
        values = dict(self.inference)
        values['thresholds'] = self.thresholds
        return InferenceOptions.from_mapping(values)


@dataclass
class TrialRecord:
    """Outcome of one trial; metrics are NaN for failed trials."""
    n_vertices: int
    p: float
    m: int
    trial: int
    seed: int
    f1: Dict[float, float]
    nmse: float
    iterations: int
    converged: bool
    runtime_ms: float
    failed: bool = False
    error: str = ''

    @property
    def cell(self) -> Tuple[int, float, int]:
        return self.n_vertices, self.p, self.m


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: List[TrialRecord]

    @property
    def failed(self) -> List[TrialRecord]:
        return [r for r in self.records if r.failed]

    def cells(self) -> List[Tuple[int, float, int]]:
        seen: Dict[Tuple[int, float, int], None] = {}
        for record in self.records:
            seen.setdefault(record.cell, None)
        return list(seen)

    def trial_header(self) -> List[str]:
        return (['n_vertices', 'p', 'm', 'trial', 'seed'] +
                ['f1@%r' % t for t in self.config.thresholds] +
                ['nmse', 'iterations', 'converged', 'runtime_ms', 'status'])

    def trial_rows(self) -> List[List[Any]]:
        rows = []
        for r in self.records:
            rows.append([r.n_vertices, repr(r.p), r.m, r.trial, r.seed] +
                        [repr(r.f1.get(t, float('nan')))
                         for t in self.config.thresholds] +
                        [repr(r.nmse), r.iterations, int(r.converged),
                         '%.3f' % r.runtime_ms,
                         'failed' if r.failed else 'ok'])
        return rows

    def summary_rows(self) -> List[List[Any]]:
        """
        One row per (cell, threshold) with median and quartiles of F1 and
        NMSE over the successful trials of the cell.
        """
        rows = []
        for n, p, m in self.cells():
            ok = [r for r in self.records if r.cell == (n, p, m)
                  and not r.failed]
            nmse_q = _quartiles([r.nmse for r in ok])
            for threshold in self.config.thresholds:
                f1_q = _quartiles([r.f1[threshold] for r in ok])
                rows.append([n, repr(p), m, repr(threshold),
                             repr(f1_q[1]), repr(f1_q[0]), repr(f1_q[2]),
                             repr(nmse_q[1]), repr(nmse_q[0]),
                             repr(nmse_q[2])])
        return rows


SUMMARY_HEADER = ['n_vertices', 'p', 'm', 'threshold', 'f1_median', 'f1_q1',
                  'f1_q3', 'nmse_median', 'nmse_q1', 'nmse_q3']


def _quartiles(values: Sequence[float]) -> Tuple[float, float, float]:
    if not values:
        return float('nan'), float('nan'), float('nan')
    q1, median, q3 = np.percentile(np.asarray(values, dtype=float),
                                   [25, 50, 75])
    return float(q1), float(median), float(q3)


def derive_seed(base_seed: int, *parts: Any) -> int:
    """Deterministic 63-bit seed from a base seed and a tuple of labels."""
    digest = hashlib.sha256(repr((int(base_seed), ) +
                                 tuple(parts)).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big') & (2**63 - 1)


def run_trial(config: ExperimentConfig, n_vertices: int, p: float, m: int,
              trial: int, context: Optional[TrialContext] = None
              ) -> TrialRecord:
    """
    Run one trial. The complex and ground truth depend on (|V|, p, trial)
    only, so the same instance is reused across sample counts.

    Raises:
        SgmError: No 3-clique appeared within ``max_regenerations`` draws,
            or a model/inference step failed.
    """
    started = time.perf_counter()
    for attempt in range(config.max_regenerations):
        seed = derive_seed(config.base_seed, n_vertices, p, trial, attempt)
        if context is not None:
            context.seed = seed
        complex_, flags = random_complex(n_vertices, config.edge_probability,
                                         p, seed)
        if complex_.n_triangles > 0:
            break
    else:
        raise SgmError("No 3-clique found in %d random complexes "
                       "(n=%d, q=%.3f)." % (config.max_regenerations,
                                            n_vertices,
                                            config.edge_probability))
    if context is not None:
        context.log_progress(
            "complex with %d edges, %d candidates (attempt %d)" %
            (complex_.n_edges, complex_.n_triangles, attempt), logging.DEBUG)

    truth = generate_ground_truth(complex_, flags, config.d_range,
                                  config.k_margin,
                                  derive_seed(seed, 'truth'))
    omega = assemble_full_precision(complex_, truth)
    covariance = sample_covariance_from_chunks(
        iter_samples(omega, m, derive_seed(seed, 'samples', m)),
        omega.edge_indices())
    result = infer(covariance, complex_, config.inference_options())

    true_set = set(int(i) for i in np.flatnonzero(flags))
    return TrialRecord(
        n_vertices=n_vertices,
        p=p,
        m=m,
        trial=trial,
        seed=seed,
        f1={t: f1_score(true_set, result.active_triangles[t])
            for t in config.thresholds},
        nmse=nmse(result, truth),
        iterations=result.iterations,
        converged=result.converged,
        runtime_ms=1000.0 * (time.perf_counter() - started))


def _failed_record(config: ExperimentConfig, n_vertices: int, p: float,
                   m: int, trial: int, seed: int,
                   error: BaseException) -> TrialRecord:
    return TrialRecord(
        n_vertices=n_vertices,
        p=p,
        m=m,
        trial=trial,
        seed=seed,
        f1={t: float('nan') for t in config.thresholds},
        nmse=float('nan'),
        iterations=0,
        converged=False,
        runtime_ms=0.0,
        failed=True,
        error='%s: %s' % (type(error).__name__, error))


def run_experiment(config: ExperimentConfig,
                   threads: Optional[int] = None) -> ExperimentReport:
    """
    Sweep the (|V|, p, M) grid. A failing trial is logged and recorded as
    failed; the sweep continues.
    """
    jobs = list(
        itertools.product(config.vertex_counts, config.fill_fractions,
                          config.sample_counts, range(config.trials)))
    logger.info("Running %d trials over %d cells (base_seed=%d).", len(jobs),
                len(jobs) // config.trials, config.base_seed)

    with TrialScheduler(threads) as scheduler:
        futures = []
        contexts = []
        for n, p, m, trial in jobs:
            context = TrialContext(label='n%d-p%g-m%d-t%d' % (n, p, m, trial),
                                   seed=derive_seed(config.base_seed, n, p,
                                                    trial, 0))
            contexts.append(context)
            futures.append(
                scheduler.submit(run_trial, config, n, p, m, trial,
                                 context=context))

        records = []
        for (n, p, m, trial), context, future in zip(jobs, contexts,
                                                     futures):
            try:
                records.append(future.result())
            except Exception as exc:
                logger.error("Trial n=%d p=%g m=%d #%d failed: %s", n, p, m,
                             trial, exc, exc_info=not isinstance(
                                 exc, SgmError))
                records.append(
                    _failed_record(config, n, p, m, trial, context.seed, exc))

    report = ExperimentReport(config, records)
    if report.failed:
        logger.warning("%d of %d trials failed.", len(report.failed),
                       len(records))
    return report


def emit_plot_data(report: ExperimentReport,
                   path: str,
                   config: Optional[Dict[str, Any]] = None) -> Dict[str, str]:
    """
    Write ``trials.csv``, ``summary.csv`` and ``report.json`` into ``path``.

    Returns:
        A mapping from file kind to written path.
    """
    if not report.records:
        raise ValueError("Cannot emit plot data for an empty report.")
    os.makedirs(path, exist_ok=True)
    resolved = {'experiment': report.config.to_dict()}
    resolved.update(config or {})
    files = {
        'trials': os.path.join(path, TRIALS_FILE),
        'summary': os.path.join(path, SUMMARY_FILE),
        'report': os.path.join(path, REPORT_FILE),
    }
    write_rows_csv(files['trials'], report.trial_header(),
                   report.trial_rows(), resolved)
    write_rows_csv(files['summary'], SUMMARY_HEADER, report.summary_rows(),
                   resolved)
    write_json(files['report'], {
        'n_trials': len(report.records),
        'n_failed': len(report.failed),
        'cells': [list(cell) for cell in report.cells()],
    }, resolved)
    logger.info("Wrote experiment outputs to %s.", path)
    return files


def load_report(path: str, config: ExperimentConfig) -> ExperimentReport:
    """Rebuild a report from a ``trials.csv`` written by emit_plot_data."""
    trials_path = path
    if os.path.isdir(path):
        trials_path = os.path.join(path, TRIALS_FILE)
    header, rows = read_rows_csv(trials_path)
    index = {name: i for i, name in enumerate(header)}
    thresholds = tuple(
        float(name[3:]) for name in header if name.startswith('f1@'))
    if thresholds != config.thresholds:
        config.thresholds = thresholds
    records = []
    for row in rows:
        records.append(
            TrialRecord(
                n_vertices=int(row[index['n_vertices']]),
                p=float(row[index['p']]),
                m=int(row[index['m']]),
                trial=int(row[index['trial']]),
                seed=int(row[index['seed']]),
                f1={t: float(row[index['f1@%r' % t]]) for t in thresholds},
                nmse=float(row[index['nmse']]),
                iterations=int(row[index['iterations']]),
                converged=bool(int(row[index['converged']])),
                runtime_ms=float(row[index['runtime_ms']]),
                failed=row[index['status']] == 'failed'))
    return ExperimentReport(config, records)
