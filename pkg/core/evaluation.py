# -*- coding: utf-8 -*-
"""
core/evaluation.py

Detection and estimation metrics, and the ground-truth parameter law used
by the synthetic experiments.
"""

import logging
from typing import Iterable, Sequence, Tuple

import numpy as np

from core.errors import DimensionMismatchError, ZeroTruthNormError
from core.sgm_model import SgmParams
from core.simplicial_complex import SimplicialComplex

logger = logging.getLogger(__name__)


def f1_score(true_set: Iterable[int], predicted_set: Iterable[int]) -> float:
    """
    Harmonic mean of precision and recall of ``predicted_set``.

    Two empty sets score 1; exactly one empty set scores 0.
    """
    truth = set(true_set)
    predicted = set(predicted_set)
    if not truth and not predicted:
        return 1.0
    if not truth or not predicted:
        return 0.0
    hits = len(truth & predicted)
    if hits == 0:
        return 0.0
    precision = hits / len(predicted)
    recall = hits / len(truth)
    return 2.0 * precision * recall / (precision + recall)


def _as_triple(params) -> Tuple[np.ndarray, np.ndarray, float]:
    """Accept SgmParams, an InferenceResult or a (d_V, d_T, k) tuple."""
    if isinstance(params, SgmParams):
        return params.d_v, params.d_t, params.k
    if hasattr(params, 'k_hat'):
        return params.d_v_hat, params.d_t_hat, params.k_hat
    d_v, d_t, k = params
    return (np.asarray(d_v, dtype=float).reshape(-1),
            np.asarray(d_t, dtype=float).reshape(-1), float(k))


def nmse(estimate, truth) -> float:
    """
    Normalized squared parameter error

        (|d_V^ - d_V|^2 + |d_T^ - d_T|^2 + |k^ - k|^2)
        / (|d_V|^2 + |d_T|^2 + k^2).

    Raises:
        DimensionMismatchError: The vectors have different lengths.
        ZeroTruthNormError: The true parameters are all zero.
    """
    est_v, est_t, est_k = _as_triple(estimate)
    true_v, true_t, true_k = _as_triple(truth)
    if est_v.shape != true_v.shape:
        raise DimensionMismatchError("estimated d_V", true_v.shape, est_v.shape)
    if est_t.shape != true_t.shape:
        raise DimensionMismatchError("estimated d_T", true_t.shape, est_t.shape)
    denominator = (float(true_v @ true_v) + float(true_t @ true_t) +
                   true_k**2)
    if denominator == 0:
        raise ZeroTruthNormError("NMSE is undefined for all-zero parameters.")
    numerator = (float(np.sum((est_v - true_v)**2)) +
                 float(np.sum((est_t - true_t)**2)) + (est_k - true_k)**2)
    return numerator / denominator


def generate_ground_truth(complex_: SimplicialComplex,
                          flags: Sequence[bool],
                          d_range: Tuple[float, float] = (0.2, 1.0),
                          k_margin: float = 1.5,
                          seed: int = 0) -> SgmParams:
    """
    Draw model parameters for a generated complex.

    d_V and the d_T of filled triangles are uniform on ``d_range``; unfilled
    candidates get d_T = 0. k is ``k_margin`` times the largest eigenvalue of
    B1^T diag(d_V) B1 + B2 diag(d_T) B2^T, so the edge precision has smallest
    eigenvalue (k_margin - 1) times that eigenvalue.

    Args:
        complex_: Complex whose triangles are the candidates.
        flags: One boolean per candidate, True when filled.
        d_range: (low, high) bounds of the uniform law, low > 0.
        k_margin: Multiplier on the spectral bound, > 1.
        seed: RNG seed.

    Returns:
        SgmParams: The ground-truth parameters.
    """
    low, high = d_range
    if not 0 < low <= high:
        raise ValueError("d_range must satisfy 0 < low <= high, got %r." %
                         (d_range, ))
    if k_margin <= 1:
        raise ValueError("k_margin must exceed 1, got %r." % k_margin)
    flags = np.asarray(flags, dtype=bool).reshape(-1)
    if flags.shape[0] != complex_.n_triangles:
        raise DimensionMismatchError("triangle flags", complex_.n_triangles,
                                     flags.shape[0])

    rng = np.random.default_rng(seed)
    d_v = rng.uniform(low, high, size=complex_.n_vertices)
    d_t = np.zeros(complex_.n_triangles)
    d_t[flags] = rng.uniform(low, high, size=int(flags.sum()))

    b1t = complex_.b1.T.astype(float)
    b2 = complex_.b2.astype(float)
    coupling = (b1t * d_v) @ b1t.T + (b2 * d_t) @ b2.T
    largest = float(np.linalg.eigvalsh(coupling)[-1]) if coupling.size else 0.0
    if largest <= 0:
        # no edges: any positive k is admissible
        largest = 1.0
    logger.debug("Ground truth: %d of %d triangles filled, k = %.6g.",
                 int(flags.sum()), complex_.n_triangles, k_margin * largest)
    return SgmParams(d_v=d_v, d_t=d_t, k=k_margin * largest)
