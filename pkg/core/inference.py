# -*- coding: utf-8 -*-
"""
core/inference.py

Maximum-likelihood estimation of (k, d_V, d_T) from edge observations.

Writing A = B1^T diag(d~_V) B1 and B = B2 diag(d~_T) B2^T with d~ = d / k,
the edge precision is k (I - A)(I - B) and the log-likelihood
log det(Omega_E) - tr(C Omega_E) splits into

    N_E log k - k tr(C) + f_V(d~_V, k) + f_T(d~_T, k),
    f_V = log det(I - A) + k tr(C A),
    f_T = log det(I - B) + k tr(C B).

``infer`` maximizes it block by block: k in closed form, then d~_V and d~_T
with the bounded concave solver from ``core.solvers``.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from core.errors import (ConstraintViolatedError, DegenerateCovarianceError,
                         DimensionMismatchError, EmptySampleError,
                         InfeasibleStartError, NonpositiveCurvatureTraceError,
                         NotPositiveDefiniteError)
from core.sgm_model import (SampleMatrix, check_factor, cholesky_factor,
                            is_identifiable)
from core.simplicial_complex import (SimplicialComplex, enumerate_3cliques,
                                     with_triangles)
from core.solvers import SolverResult, maximize_bounded

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SampleCovariance:
    """Uncentred edge covariance C and the number of samples behind it.

    ``m`` is None for a population (oracle) covariance.
    """

    c: np.ndarray
    m: Optional[int] = None

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionMismatchError("sample covariance", "square", c.shape)
        scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
        if not np.allclose(c, c.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("Sample covariance is not symmetric.")
        c = 0.5 * (c + c.T)
        if c.size:
            smallest = float(np.linalg.eigvalsh(c)[0])
            if smallest < -1e-10 * max(np.trace(c), 1.0):
                raise ValueError("Sample covariance is not positive "
                                 "semidefinite (eigenvalue %.3e)." % smallest)
        c.setflags(write=False)
        object.__setattr__(self, 'c', c)

    @property
    def dimension(self) -> int:
        return self.c.shape[0]


@dataclass
class InferenceOptions:
    """Tolerances and knobs of the block-coordinate estimator."""
    max_outer_iterations: int = 500
    objective_tolerance: float = 1e-8
    kkt_tolerance: float = 1e-7
    thresholds: Tuple[float, ...] = (0.01, 0.05, 0.1)
    init_scale: float = 1e-3
    d_v_floor: float = 1e-8
    max_inner_iterations: int = 200
    # 'newton' or 'gradient' for the subproblems
    method: str = 'newton'
    # 'block' runs the block-coordinate loop, 'joint' the monolithic solver
    solver: str = 'block'
    # use every 3-clique of the 1-skeleton as a candidate triangle
    fill_cliques: bool = True

    def __post_init__(self):
        self.thresholds = tuple(sorted(float(t) for t in self.thresholds))
        positive = {
            'max_outer_iterations': self.max_outer_iterations,
            'objective_tolerance': self.objective_tolerance,
            'kkt_tolerance': self.kkt_tolerance,
            'init_scale': self.init_scale,
            'd_v_floor': self.d_v_floor,
            'max_inner_iterations': self.max_inner_iterations,
        }
        for key, value in positive.items():
            if not value > 0:
                raise ValueError("InferenceOptions.%s must be positive, got "
                                 "%r." % (key, value))
        if any(t <= 0 for t in self.thresholds):
            raise ValueError("Pruning thresholds must be positive.")
        if self.method not in ('newton', 'gradient'):
            raise ValueError("Unknown subproblem method '%s'." % self.method)
        if self.solver not in ('block', 'joint'):
            raise ValueError("Unknown solver '%s'." % self.solver)

    @classmethod
    def from_mapping(cls, values: Dict[str, object]) -> "InferenceOptions":
        """Build options from a mapping, ignoring unknown keys."""
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in values.items() if k in known})

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data['thresholds'] = list(self.thresholds)
        return data


@dataclass
class InferenceResult:
    """Estimates and diagnostics produced by ``infer``."""
    k_hat: float
    d_v_hat: np.ndarray
    d_t_hat: np.ndarray
    objective_trace: List[float]
    converged: bool
    iterations: int
    active_triangles: Dict[float, Tuple[int, ...]]
    triangles: Tuple[Tuple[int, int, int], ...] = ()
    runtime_seconds: float = 0.0
    options: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            'k_hat': self.k_hat,
            'd_V_hat': self.d_v_hat.tolist(),
            'd_T_hat': self.d_t_hat.tolist(),
            'objective_trace': list(self.objective_trace),
            'converged': self.converged,
            'iterations': self.iterations,
            'active_triangles': {
                repr(threshold): list(indices)
                for threshold, indices in self.active_triangles.items()
            },
            'triangles': [list(t) for t in self.triangles],
        }


# ---------------------------------------------------------------------------
# sample covariance
# ---------------------------------------------------------------------------


def _edge_values(samples: Union[SampleMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(samples, SampleMatrix):
        if any(label[0] in 'vt' for label in samples.labels):
            samples = samples.edge_block()
        return samples.values
    return np.atleast_2d(np.asarray(samples, dtype=float))


def sample_covariance(
        samples: Union[SampleMatrix, np.ndarray]) -> SampleCovariance:
    """
    C = (1/M) sum_i x_E[i] x_E[i]^T, without mean subtraction.

    Full-model samples are reduced to their edge columns first.

    Raises:
        EmptySampleError: There are no samples.
    """
    values = _edge_values(samples)
    m = values.shape[0]
    if m < 1 or values.size == 0:
        raise EmptySampleError("Cannot build a covariance from zero samples.")
    return SampleCovariance(values.T @ values / m, m)


def sample_covariance_from_chunks(chunks: Iterable[np.ndarray],
                                  columns: Sequence[int]) -> SampleCovariance:
    """Accumulate C over ``columns`` of row chunks, e.g. from iter_samples."""
    columns = np.asarray(columns, dtype=np.int64)
    total = np.zeros((columns.size, columns.size))
    m = 0
    for chunk in chunks:
        block = chunk[:, columns]
        total += block.T @ block
        m += block.shape[0]
    if m == 0:
        raise EmptySampleError("Cannot build a covariance from zero samples.")
    return SampleCovariance(total / m, m)


# ---------------------------------------------------------------------------
# objective and its pieces
# ---------------------------------------------------------------------------


def _quadratic_diag(vectors: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """diag(U^T M U) without forming the full product."""
    return np.sum(vectors * (matrix @ vectors), axis=0)


class _FactorBlock:
    """
    One of the two factors I - U diag(x) U^T, with U = B1^T (vertices) or
    U = B2 (triangles), and its contribution
    log det(I - U diag(x) U^T) + k tr(C U diag(x) U^T).
    """

    def __init__(self, vectors: np.ndarray, c: np.ndarray, constraint: str):
        self.vectors = vectors.astype(float)
        self.constraint = constraint
        # tr(C U diag(x) U^T) = x . curvature
        self.curvature = _quadratic_diag(self.vectors, c)

    def factor(self, x: np.ndarray) -> np.ndarray:
        n = self.vectors.shape[0]
        return np.eye(n) - (self.vectors * x) @ self.vectors.T

    def cholesky(self, x: np.ndarray) -> np.ndarray:
        return check_factor(self.factor(x), self.constraint)

    def log_det(self, x: np.ndarray) -> float:
        lower = self.cholesky(x)
        return 2.0 * float(np.sum(np.log(np.diag(lower))))

    def _whitened(self, x: np.ndarray) -> np.ndarray:
        """W with W^T W = U^T (I - U diag(x) U^T)^-1 U."""
        lower = self.cholesky(x)
        return scipy.linalg.solve_triangular(lower, self.vectors, lower=True)

    def value(self, x: np.ndarray, k: float) -> float:
        return self.log_det(x) + k * float(self.curvature @ x)

    def value_or_none(self, x: np.ndarray, k: float) -> Optional[float]:
        try:
            return self.value(x, k)
        except ConstraintViolatedError:
            return None

    def gradient(self, x: np.ndarray, k: float) -> np.ndarray:
        whitened = self._whitened(x)
        return -np.einsum('ei,ei->i', whitened, whitened) + k * self.curvature

    def hessian(self, x: np.ndarray) -> np.ndarray:
        whitened = self._whitened(x)
        gram = whitened.T @ whitened
        return -(gram * gram)


def _check_covariance(c: SampleCovariance,
                      complex_: SimplicialComplex) -> np.ndarray:
    if c.dimension != complex_.n_edges:
        raise DimensionMismatchError("sample covariance", complex_.n_edges,
                                     c.dimension)
    return c.c


def _check_vector(x, size: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != size:
        raise DimensionMismatchError(what, size, x.shape[0])
    return x


def objective(c: SampleCovariance, complex_: SimplicialComplex, dt_v,
              dt_t, k: float) -> float:
    """
    Log-likelihood in the scale-separated parameterization:
    N_E log k + log det(I - A) + log det(I - B) - k tr(C)
    + k tr(C A) + k tr(C B).

    Raises:
        ConstraintViolatedError: Factor (a) or (b) is not PD.
    """
    matrix = _check_covariance(c, complex_)
    dt_v = _check_vector(dt_v, complex_.n_vertices, "d~_V")
    dt_t = _check_vector(dt_t, complex_.n_triangles, "d~_T")
    if k <= 0:
        raise ValueError("k must be positive, got %r." % k)
    vertex = _FactorBlock(complex_.b1.T, matrix, 'a')
    triangle = _FactorBlock(complex_.b2, matrix, 'b')
    return (complex_.n_edges * np.log(k) - k * np.trace(matrix) +
            vertex.value(dt_v, k) + triangle.value(dt_t, k))


def objective_gradient(
        c: SampleCovariance, complex_: SimplicialComplex, dt_v, dt_t,
        k: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Gradient of ``objective`` with respect to (d~_V, d~_T, k)."""
    matrix = _check_covariance(c, complex_)
    dt_v = _check_vector(dt_v, complex_.n_vertices, "d~_V")
    dt_t = _check_vector(dt_t, complex_.n_triangles, "d~_T")
    vertex = _FactorBlock(complex_.b1.T, matrix, 'a')
    triangle = _FactorBlock(complex_.b2, matrix, 'b')
    grad_k = (complex_.n_edges / k - np.trace(matrix) +
              float(vertex.curvature @ dt_v) +
              float(triangle.curvature @ dt_t))
    return vertex.gradient(dt_v, k), triangle.gradient(dt_t, k), grad_k


def log_likelihood(c: SampleCovariance, omega_e) -> float:
    """log det(Omega_E) - tr(C Omega_E) evaluated directly."""
    matrix = getattr(omega_e, 'matrix', omega_e)
    lower = cholesky_factor(matrix, "edge precision")
    return (2.0 * float(np.sum(np.log(np.diag(lower)))) -
            float(np.sum(c.c * matrix)))


def update_k(c: SampleCovariance, complex_: SimplicialComplex, dt_v,
             dt_t) -> float:
    """
    Closed-form maximizer k* = N_E / tr(C (I - A - B)) of the k block.

    Raises:
        NonpositiveCurvatureTraceError: tr(C (I - A - B)) <= 0.
    """
    matrix = _check_covariance(c, complex_)
    dt_v = _check_vector(dt_v, complex_.n_vertices, "d~_V")
    dt_t = _check_vector(dt_t, complex_.n_triangles, "d~_T")
    vertex = _FactorBlock(complex_.b1.T, matrix, 'a')
    triangle = _FactorBlock(complex_.b2, matrix, 'b')
    s = (np.trace(matrix) - float(vertex.curvature @ dt_v) -
         float(triangle.curvature @ dt_t))
    if s <= 0:
        raise NonpositiveCurvatureTraceError(float(s))
    return complex_.n_edges / s


def _solve_block(block: _FactorBlock, k: float, init, lower: float,
                 opts: InferenceOptions, name: str) -> SolverResult:
    init = np.asarray(init, dtype=float)
    if np.any(init < lower):
        raise InfeasibleStartError("%s: initial point below its bound %g." %
                                   (name, lower))
    if block.value_or_none(init, k) is None:
        raise InfeasibleStartError("%s: initial point violates constraint "
                                   "(%s)." % (name, block.constraint))
    return maximize_bounded(lambda x: block.value_or_none(x, k),
                            lambda x: block.gradient(x, k),
                            init,
                            np.full(init.shape, lower),
                            hessian_fn=block.hessian,
                            tolerance=opts.kkt_tolerance,
                            max_iterations=opts.max_inner_iterations,
                            method=opts.method,
                            name=name)


def solve_vertex_subproblem(c: SampleCovariance, complex_: SimplicialComplex,
                            k: float, init,
                            opts: InferenceOptions) -> SolverResult:
    """
    Maximize f_V(d~_V, k) over d~_V >= d_v_floor subject to (a).

    Raises:
        InfeasibleStartError: ``init`` is below the floor or violates (a).
    """
    matrix = _check_covariance(c, complex_)
    init = _check_vector(init, complex_.n_vertices, "d~_V")
    block = _FactorBlock(complex_.b1.T, matrix, 'a')
    return _solve_block(block, k, init, opts.d_v_floor, opts,
                        "vertex subproblem")


def solve_triangle_subproblem(c: SampleCovariance,
                              complex_: SimplicialComplex, k: float, init,
                              opts: InferenceOptions) -> SolverResult:
    """
    Maximize f_T(d~_T, k) over d~_T >= 0 subject to (b).

    Raises:
        InfeasibleStartError: ``init`` is negative or violates (b).
    """
    matrix = _check_covariance(c, complex_)
    init = _check_vector(init, complex_.n_triangles, "d~_T")
    block = _FactorBlock(complex_.b2, matrix, 'b')
    return _solve_block(block, k, init, 0.0, opts, "triangle subproblem")


def prune_triangles(d_t_hat, threshold: float) -> Tuple[int, ...]:
    """Indices of the triangles whose estimate exceeds ``threshold``."""
    if threshold < 0:
        raise ValueError("Threshold must be nonnegative, got %r." % threshold)
    d_t_hat = np.asarray(d_t_hat, dtype=float)
    return tuple(int(i) for i in np.flatnonzero(d_t_hat > threshold))


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _as_covariance(data) -> SampleCovariance:
    if isinstance(data, SampleCovariance):
        return data
    return sample_covariance(data)


def _relative_change(previous: float, current: float) -> float:
    return abs(current - previous) / max(1.0, abs(current))


def _candidate_complex(complex_: SimplicialComplex,
                       opts: InferenceOptions) -> SimplicialComplex:
    if not opts.fill_cliques:
        return complex_
    candidates = enumerate_3cliques(complex_)
    if candidates != complex_.triangles:
        logger.info("Using %d 3-cliques as candidate triangles (complex "
                    "listed %d).", len(candidates), complex_.n_triangles)
        return with_triangles(complex_, candidates)
    return complex_


def _finish(complex_: SimplicialComplex, k: float, dt_v: np.ndarray,
            dt_t: np.ndarray, trace: List[float], converged: bool,
            iterations: int, opts: InferenceOptions,
            started: float) -> InferenceResult:
    d_t_hat = k * dt_t
    return InferenceResult(
        k_hat=float(k),
        d_v_hat=k * dt_v,
        d_t_hat=d_t_hat,
        objective_trace=trace,
        converged=converged,
        iterations=iterations,
        active_triangles={
            threshold: prune_triangles(d_t_hat, threshold)
            for threshold in opts.thresholds
        },
        triangles=complex_.triangles,
        runtime_seconds=time.perf_counter() - started,
        options=opts.to_dict())


def infer(data,
          complex_: SimplicialComplex,
          opts: Optional[InferenceOptions] = None) -> InferenceResult:
    """
    Estimate (k, d_V, d_T) from edge samples or their covariance.

    Each outer sweep updates k in closed form, then d~_V, then d~_T; the
    loop stops once the relative objective change falls below
    ``objective_tolerance`` or after ``max_outer_iterations`` sweeps.
    Estimates are returned on the original scale, d = k d~.

    Args:
        data: A SampleCovariance, a SampleMatrix or an M x |E| array.
        complex_: The observed complex; with ``fill_cliques`` its triangles
            are replaced by all 3-cliques of the 1-skeleton.
        opts (InferenceOptions | None): Solver settings.

    Raises:
        DegenerateCovarianceError: tr(C) == 0.
        DimensionMismatchError: The data do not have one column per edge.
    """
    opts = opts or InferenceOptions()
    started = time.perf_counter()
    if complex_.n_edges < 1:
        raise DimensionMismatchError("complex edges", ">= 1", 0)
    complex_ = _candidate_complex(complex_, opts)
    c = _as_covariance(data)
    matrix = _check_covariance(c, complex_)
    if np.trace(matrix) <= 0:
        raise DegenerateCovarianceError("Sample covariance has zero trace.")
    if not is_identifiable(complex_):
        logger.warning("Parameters are not identifiable on this complex; "
                       "some estimates are determined only up to sums.")

    if opts.solver == 'joint':
        return solve_joint(c, complex_, opts, started=started)

    dt_v = np.full(complex_.n_vertices, max(opts.init_scale, opts.d_v_floor))
    dt_t = np.full(complex_.n_triangles, opts.init_scale)
    k = complex_.n_edges / np.trace(matrix)
    previous = objective(c, complex_, dt_v, dt_t, k)

    trace: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_outer_iterations + 1):
        k = update_k(c, complex_, dt_v, dt_t)
        vertex = solve_vertex_subproblem(c, complex_, k, dt_v, opts)
        triangle = solve_triangle_subproblem(c, complex_, k, dt_t, opts)
        dt_v, dt_t = vertex.x, triangle.x
        current = objective(c, complex_, dt_v, dt_t, k)
        trace.append(current)
        logger.debug("Sweep %d: objective %.12g, k %.6g, inner iterations "
                     "%d/%d.", iterations, current, k, vertex.iterations,
                     triangle.iterations)
        if _relative_change(previous, current) < opts.objective_tolerance:
            converged = vertex.converged and triangle.converged
            break
        previous = current

    if converged:
        logger.info("Inference converged after %d sweeps (objective %.10g).",
                    iterations, trace[-1])
    else:
        logger.warning("Inference stopped after %d sweeps without meeting "
                       "the tolerance.", iterations)
    return _finish(complex_, k, dt_v, dt_t, trace, converged, iterations,
                   opts, started)


class _JointProblem:
    """
    The likelihood as a function of theta = (k, d_V, d_T) directly:
    Omega_E(theta) = k I - U diag(d) U^T with U = [B1^T | B2].
    """

    def __init__(self, c: np.ndarray, complex_: SimplicialComplex):
        self.c = c
        self.vectors = np.hstack([complex_.b1.T,
                                  complex_.b2]).astype(float)
        self.n_edges = complex_.n_edges
        self.curvature = _quadratic_diag(self.vectors, c)

    def precision(self, theta: np.ndarray) -> np.ndarray:
        k, d = theta[0], theta[1:]
        return k * np.eye(self.n_edges) - (self.vectors * d) @ self.vectors.T

    def value(self, theta: np.ndarray) -> Optional[float]:
        omega = self.precision(theta)
        try:
            lower = cholesky_factor(omega, "edge precision")
        except NotPositiveDefiniteError:
            return None
        return (2.0 * float(np.sum(np.log(np.diag(lower)))) -
                float(np.sum(self.c * omega)))

    def _covariance(self, theta: np.ndarray) -> np.ndarray:
        lower = cholesky_factor(self.precision(theta), "edge precision")
        return scipy.linalg.cho_solve((lower, True), np.eye(self.n_edges))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        sigma = self._covariance(theta)
        grad = np.empty_like(theta)
        grad[0] = np.trace(sigma) - np.trace(self.c)
        grad[1:] = self.curvature - _quadratic_diag(self.vectors, sigma)
        return grad

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        sigma = self._covariance(theta)
        projected = self.vectors.T @ sigma
        hess = np.empty((theta.size, theta.size))
        hess[0, 0] = -np.sum(sigma * sigma)
        hess[0, 1:] = hess[1:, 0] = np.einsum('ie,ie->i', projected,
                                              projected)
        inner = projected @ self.vectors
        hess[1:, 1:] = -(inner * inner)
        return hess


def solve_joint(c: SampleCovariance,
                complex_: SimplicialComplex,
                opts: Optional[InferenceOptions] = None,
                started: Optional[float] = None) -> InferenceResult:
    """
    Maximize log det(Omega_E) - tr(C Omega_E) over (k, d_V, d_T) jointly,
    without the scale separation; an independent check on ``infer``.
    """
    opts = opts or InferenceOptions()
    started = time.perf_counter() if started is None else started
    matrix = _check_covariance(c, complex_)
    problem = _JointProblem(matrix, complex_)
    n_v, n_t = complex_.n_vertices, complex_.n_triangles

    k0 = complex_.n_edges / np.trace(matrix)
    theta = np.concatenate(
        [[k0],
         np.full(n_v, k0 * max(opts.init_scale, opts.d_v_floor)),
         np.full(n_t, k0 * opts.init_scale)])
    lower = np.concatenate([[0.0], np.full(n_v, opts.d_v_floor),
                            np.zeros(n_t)])
    result = maximize_bounded(problem.value,
                              problem.gradient,
                              theta,
                              lower,
                              hessian_fn=problem.hessian,
                              tolerance=opts.kkt_tolerance,
                              max_iterations=opts.max_outer_iterations,
                              method=opts.method,
                              name="joint solver")
    k = result.x[0]
    return _finish(complex_, k, result.x[1:1 + n_v] / k,
                   result.x[1 + n_v:] / k, [result.value], result.converged,
                   result.iterations, opts, started)
