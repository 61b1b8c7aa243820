# -*- coding: utf-8 -*-
"""
core/sgm_model.py

The Simplicial Gaussian Model: a zero-mean Gaussian over vertex, edge and
triangle variables whose precision is

    [[ D_V^-1,  -B1,    0      ],
     [ -B1^T,   k I,   -B2     ],
     [ 0,      -B2^T,   D_T^-1 ]]

with homogeneous edge precision k. This module assembles that matrix,
derives the edge-level marginal precision in closed form, exposes the
generic Schur complement and the conditional-regression form of the model,
and samples from it.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from core.errors import (ConstraintViolatedError, DimensionMismatchError,
                         InvalidParamsError, NotPositiveDefiniteError,
                         SingularBlockError)
from core.simplicial_complex import SimplicialComplex

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
# Pivots below this fraction of the mean diagonal entry count as singular.
PIVOT_RELATIVE_FLOOR = 1e-12
DEFAULT_CHUNK_SIZE = 10000


@dataclass(frozen=True)
class SgmParams:
    """
    Parameter triple of the model.

    Attributes:
        d_v: Diagonal of D_V, one strictly positive entry per vertex.
        d_t: Diagonal of D_T, one nonnegative entry per candidate triangle.
            A zero entry means the triangle is absent.
        k: Homogeneous edge precision (D_E = I / k).
    """

    d_v: np.ndarray
    d_t: np.ndarray
    k: float

    def __post_init__(self):
        d_v = np.array(self.d_v, dtype=float).reshape(-1)
        d_t = np.array(self.d_t, dtype=float).reshape(-1)
        k = float(self.k)
        if not np.all(np.isfinite(d_v)) or np.any(d_v <= 0):
            raise InvalidParamsError("d_V must be finite and strictly positive.")
        if not np.all(np.isfinite(d_t)) or np.any(d_t < 0):
            raise InvalidParamsError("d_T must be finite and nonnegative.")
        if not np.isfinite(k) or k <= 0:
            raise InvalidParamsError("k must be finite and strictly positive, "
                                     "got %r." % k)
        d_v.setflags(write=False)
        d_t.setflags(write=False)
        object.__setattr__(self, 'd_v', d_v)
        object.__setattr__(self, 'd_t', d_t)
        object.__setattr__(self, 'k', k)

    def check_dimensions(self, complex_: SimplicialComplex) -> None:
        if self.d_v.shape[0] != complex_.n_vertices:
            raise DimensionMismatchError("d_V", complex_.n_vertices,
                                         self.d_v.shape[0])
        if self.d_t.shape[0] != complex_.n_triangles:
            raise DimensionMismatchError("d_T", complex_.n_triangles,
                                         self.d_t.shape[0])

    def rescaled(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return the scale-free pair (d_V / k, d_T / k)."""
        return self.d_v / self.k, self.d_t / self.k

    @property
    def filled_triangles(self) -> np.ndarray:
        return np.flatnonzero(self.d_t > 0)

    def to_dict(self) -> Dict[str, object]:
        return {
            'k': self.k,
            'd_V': self.d_v.tolist(),
            'd_T': self.d_t.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "SgmParams":
        return cls(d_v=data['d_V'], d_t=data['d_T'], k=data['k'])


@dataclass(frozen=True)
class PrecisionMatrix:
    """
    A dense symmetric precision matrix with one label per coordinate.

    Labels are ``v<i>``, ``e<j>`` and ``t<l>`` for vertex, edge and triangle
    coordinates, where ``l`` is the index of the triangle in the complex's
    candidate list. ``kind`` is ``full``, ``edge`` or ``marginal``.
    """

    matrix: np.ndarray
    kind: str
    labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError("precision matrix", "square",
                                         matrix.shape)
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if not np.allclose(matrix, matrix.T, rtol=0.0,
                           atol=SYMMETRY_TOLERANCE * scale):
            raise DimensionMismatchError("%s precision" % self.kind,
                                         "symmetric", "asymmetric")
        labels = tuple(self.labels) or tuple("x%d" % i
                                             for i in range(matrix.shape[0]))
        if len(labels) != matrix.shape[0]:
            raise DimensionMismatchError("precision labels", matrix.shape[0],
                                         len(labels))
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'labels', labels)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def indices(self, prefix: str) -> np.ndarray:
        """Positions of the coordinates whose label starts with ``prefix``."""
        return np.array(
            [i for i, label in enumerate(self.labels)
             if label.startswith(prefix)],
            dtype=np.int64)

    def edge_indices(self) -> np.ndarray:
        return self.indices('e')


@dataclass(frozen=True)
class SampleMatrix:
    """M x dimension matrix of draws with the column labels of its source."""

    values: np.ndarray
    labels: Tuple[str, ...]

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def columns(self, prefix: str) -> np.ndarray:
        idx = [i for i, label in enumerate(self.labels)
               if label.startswith(prefix)]
        return self.values[:, idx]

    def edge_block(self) -> "SampleMatrix":
        labels = tuple(label for label in self.labels
                       if label.startswith('e'))
        return SampleMatrix(self.columns('e'), labels)


class RegressionModel(NamedTuple):
    """
    The model written as three coupled regressions with independent
    Gaussian innovations:

        X_V = (D_V B1)   X_E + Z_V,             Z_V ~ N(0, D_V)
        X_E = (D_E B1^T) X_V + (D_E B2) X_T + Z_E, Z_E ~ N(0, D_E)
        X_T = (D_T B2^T) X_E + Z_T,             Z_T ~ N(0, D_T)

    Triangle terms only cover triangles with d_T > 0 and are ``None`` when
    there are none.
    """
    vertex_from_edge: np.ndarray
    edge_from_vertex: np.ndarray
    edge_from_triangle: Optional[np.ndarray]
    triangle_from_edge: Optional[np.ndarray]
    vertex_covariance: np.ndarray
    edge_covariance: np.ndarray
    triangle_covariance: Optional[np.ndarray]
    active_triangles: np.ndarray

    def edge_residuals(self, samples: SampleMatrix) -> np.ndarray:
        """Return X_E minus its regression on X_V and X_T, row by row."""
        x_v = samples.columns('v')
        x_e = samples.columns('e')
        fitted = x_v @ self.edge_from_vertex.T
        if self.edge_from_triangle is not None:
            fitted = fitted + samples.columns('t') @ self.edge_from_triangle.T
        return x_e - fitted


def cholesky_factor(matrix: np.ndarray, what: str) -> np.ndarray:
    """
    Lower Cholesky factor of ``matrix`` with a pivot-margin check.

    Raises:
        NotPositiveDefiniteError: The factorization fails, or a squared
            pivot falls below 1e-12 times the mean diagonal entry.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[0] == 0:
        return np.zeros((0, 0))
    try:
        lower = scipy.linalg.cholesky(matrix, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefiniteError(what) from exc
    pivots = np.diag(lower)**2
    floor = PIVOT_RELATIVE_FLOOR * abs(np.trace(matrix)) / matrix.shape[0]
    if pivots.min() <= floor:
        raise NotPositiveDefiniteError(what, float(pivots.min()))
    return lower


def _full_labels(complex_: SimplicialComplex,
                 active_triangles: np.ndarray) -> Tuple[str, ...]:
    return (tuple("v%d" % i for i in range(complex_.n_vertices)) +
            tuple("e%d" % i for i in range(complex_.n_edges)) +
            tuple("t%d" % i for i in active_triangles))


def edge_labels(n_edges: int) -> Tuple[str, ...]:
    return tuple("e%d" % i for i in range(n_edges))


def assemble_full_precision(complex_: SimplicialComplex,
                            params: SgmParams) -> PrecisionMatrix:
    """
    Assemble the joint vertex/edge/triangle precision matrix.

    Triangles with d_T = 0 carry no latent variable and are left out of the
    third block, so D_T stays invertible.

    Raises:
        DimensionMismatchError: Parameter lengths do not match the complex.
        NotPositiveDefiniteError: The assembled matrix is not PD.
    """
    params.check_dimensions(complex_)
    b1 = complex_.b1.astype(float)
    active = params.filled_triangles
    b2 = complex_.b2[:, active].astype(float)
    n_v, n_e, n_t = complex_.n_vertices, complex_.n_edges, active.shape[0]

    omega = np.zeros((n_v + n_e + n_t, n_v + n_e + n_t))
    v, e, t = slice(0, n_v), slice(n_v, n_v + n_e), slice(n_v + n_e, None)
    omega[v, v] = np.diag(1.0 / params.d_v)
    omega[v, e] = -b1
    omega[e, v] = -b1.T
    omega[e, e] = params.k * np.eye(n_e)
    omega[e, t] = -b2
    omega[t, e] = -b2.T
    omega[t, t] = np.diag(1.0 / params.d_t[active])

    cholesky_factor(omega, "full SGM precision")
    return PrecisionMatrix(omega, 'full', _full_labels(complex_, active))


def _as_matrix(omega) -> np.ndarray:
    if isinstance(omega, PrecisionMatrix):
        return omega.matrix
    return np.asarray(omega, dtype=float)


def schur_complement(omega, keep_indices: Sequence[int]) -> PrecisionMatrix:
    """
    Precision of the Gaussian marginal over ``keep_indices``:
    Omega_YY - Omega_YW Omega_WW^-1 Omega_WY.

    Args:
        omega: A PrecisionMatrix or a square array.
        keep_indices: Coordinates to keep, in output order.

    Raises:
        SingularBlockError: The eliminated block is numerically singular.
    """
    matrix = _as_matrix(omega)
    dim = matrix.shape[0]
    keep = np.asarray(keep_indices, dtype=np.int64).reshape(-1)
    if keep.size == 0:
        raise ValueError("keep_indices must not be empty.")
    if keep.min() < 0 or keep.max() >= dim:
        raise DimensionMismatchError("keep_indices", "indices in [0, %d)" % dim,
                                     keep.tolist())
    if np.unique(keep).size != keep.size:
        raise ValueError("keep_indices contains duplicates.")
    drop = np.setdiff1d(np.arange(dim), keep)

    kept = matrix[np.ix_(keep, keep)]
    if drop.size:
        cross = matrix[np.ix_(keep, drop)]
        block = matrix[np.ix_(drop, drop)]
        try:
            factor = scipy.linalg.cho_factor(block, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularBlockError(
                "Eliminated block of size %d is singular." % drop.size) from exc
        kept = kept - cross @ scipy.linalg.cho_solve(factor, cross.T)
        kept = 0.5 * (kept + kept.T)

    if isinstance(omega, PrecisionMatrix):
        labels = tuple(omega.labels[i] for i in keep)
    else:
        labels = ()
    return PrecisionMatrix(kept, 'marginal', labels)


def _rank_one_sum(vectors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Return vectors @ diag(weights) @ vectors.T."""
    return (vectors * weights) @ vectors.T


def edge_marginal_precision(complex_: SimplicialComplex,
                            params: SgmParams) -> PrecisionMatrix:
    """
    Closed-form precision of the edge marginal:
    k I - B1^T diag(d_V) B1 - B2 diag(d_T) B2^T.

    Raises:
        NotPositiveDefiniteError: The result is not positive definite.
    """
    params.check_dimensions(complex_)
    b1t = complex_.b1.T.astype(float)
    b2 = complex_.b2.astype(float)
    omega_e = (params.k * np.eye(complex_.n_edges) -
               _rank_one_sum(b1t, params.d_v) - _rank_one_sum(b2, params.d_t))
    cholesky_factor(omega_e, "edge marginal precision")
    return PrecisionMatrix(omega_e, 'edge', edge_labels(complex_.n_edges))


def vertex_factor(complex_: SimplicialComplex,
                  dt_v: np.ndarray) -> np.ndarray:
    """Factor (a): I - B1^T diag(dt_v) B1."""
    b1t = complex_.b1.T.astype(float)
    return np.eye(complex_.n_edges) - _rank_one_sum(b1t, dt_v)


def triangle_factor(complex_: SimplicialComplex,
                    dt_t: np.ndarray) -> np.ndarray:
    """Factor (b): I - B2 diag(dt_t) B2^T."""
    b2 = complex_.b2.astype(float)
    return np.eye(complex_.n_edges) - _rank_one_sum(b2, dt_t)


def check_factor(factor: np.ndarray, constraint: str) -> np.ndarray:
    """Return the Cholesky factor of (a)/(b) or raise ConstraintViolatedError."""
    try:
        return cholesky_factor(factor, "factor (%s)" % constraint)
    except NotPositiveDefiniteError as exc:
        raise ConstraintViolatedError(constraint) from exc


def factorized_edge_precision(complex_: SimplicialComplex, dt_v: Sequence[float],
                              dt_t: Sequence[float],
                              k: float) -> PrecisionMatrix:
    """
    Edge precision in product form k (I - A)(I - B), with
    A = B1^T diag(dt_v) B1 and B = B2 diag(dt_t) B2^T. Since B1 B2 = 0 the
    product equals the closed form with d_V = k dt_v and d_T = k dt_t.

    Raises:
        ConstraintViolatedError: Factor (a) or (b) is not PD.
    """
    dt_v = np.asarray(dt_v, dtype=float)
    dt_t = np.asarray(dt_t, dtype=float)
    if dt_v.shape != (complex_.n_vertices, ):
        raise DimensionMismatchError("d~_V", complex_.n_vertices, dt_v.shape)
    if dt_t.shape != (complex_.n_triangles, ):
        raise DimensionMismatchError("d~_T", complex_.n_triangles, dt_t.shape)
    if k <= 0:
        raise InvalidParamsError("k must be strictly positive, got %r." % k)
    factor_a = vertex_factor(complex_, dt_v)
    factor_b = triangle_factor(complex_, dt_t)
    check_factor(factor_a, 'a')
    check_factor(factor_b, 'b')
    product = k * (factor_a @ factor_b)
    return PrecisionMatrix(0.5 * (product + product.T), 'edge',
                           edge_labels(complex_.n_edges))


def regression_decomposition(complex_: SimplicialComplex,
                             params: SgmParams) -> RegressionModel:
    """Coefficients and innovation covariances of the regression form."""
    params.check_dimensions(complex_)
    b1 = complex_.b1.astype(float)
    active = params.filled_triangles
    b2 = complex_.b2[:, active].astype(float)
    d_e = 1.0 / params.k
    d_t = params.d_t[active]

    has_triangles = active.size > 0
    return RegressionModel(
        vertex_from_edge=params.d_v[:, None] * b1,
        edge_from_vertex=d_e * b1.T,
        edge_from_triangle=d_e * b2 if has_triangles else None,
        triangle_from_edge=d_t[:, None] * b2.T if has_triangles else None,
        vertex_covariance=np.diag(params.d_v),
        edge_covariance=d_e * np.eye(complex_.n_edges),
        triangle_covariance=np.diag(d_t) if has_triangles else None,
        active_triangles=active,
    )


def covariance_from_precision(omega) -> np.ndarray:
    """Invert a PD precision through its Cholesky factor."""
    matrix = _as_matrix(omega)
    lower = cholesky_factor(matrix, "precision")
    covariance = scipy.linalg.cho_solve((lower, True), np.eye(matrix.shape[0]))
    return 0.5 * (covariance + covariance.T)


def iter_samples(omega: PrecisionMatrix,
                 m: int,
                 seed: int,
                 chunk_size: int = DEFAULT_CHUNK_SIZE) -> Iterator[np.ndarray]:
    """
    Yield ``m`` draws from N(0, omega^-1) in row chunks.

    With omega = L L^T, each draw solves L^T x = z for standard normal z,
    so the covariance is never formed.
    """
    if m < 1:
        raise ValueError("Sample count must be at least 1, got %r." % m)
    lower = cholesky_factor(_as_matrix(omega), "%s precision" %
                            getattr(omega, 'kind', 'sampling'))
    rng = np.random.default_rng(seed)
    dim = lower.shape[0]
    remaining = int(m)
    while remaining > 0:
        rows = min(chunk_size, remaining)
        # one row per draw, so the stream does not depend on chunk_size
        z = rng.standard_normal((rows, dim)).T
        yield scipy.linalg.solve_triangular(lower.T, z, lower=False).T
        remaining -= rows


def sample(omega: PrecisionMatrix,
           m: int,
           seed: int,
           chunk_size: int = DEFAULT_CHUNK_SIZE) -> SampleMatrix:
    """Draw ``m`` i.i.d. samples from N(0, omega^-1); deterministic in seed."""
    values = np.vstack(list(iter_samples(omega, m, seed, chunk_size)))
    labels = omega.labels if isinstance(omega, PrecisionMatrix) else tuple(
        "x%d" % i for i in range(values.shape[1]))
    logger.debug("Drew %d samples of dimension %d (seed=%d).", m,
                 values.shape[1], seed)
    return SampleMatrix(values, labels)


def identifiability_rank(complex_: SimplicialComplex) -> Tuple[int, int]:
    """
    Rank of the linear map (k, d_V, d_T) -> edge precision, and the number of
    parameters.

    The edge precision is k I - sum_v d_v u_v u_v^T - sum_t d_t c_t c_t^T with
    u_v the rows of B1 and c_t the columns of B2; the rank is that of the Gram
    matrix of these basis matrices under the trace inner product,
    <u u^T, w w^T> = (u^T w)^2.
    """
    vectors = np.hstack([complex_.b1.T, complex_.b2]).astype(float)
    inner = vectors.T @ vectors
    n_params = 1 + vectors.shape[1]
    gram = np.empty((n_params, n_params))
    gram[0, 0] = complex_.n_edges
    gram[0, 1:] = gram[1:, 0] = np.diag(inner)
    gram[1:, 1:] = inner**2
    return int(np.linalg.matrix_rank(gram)), n_params


def is_identifiable(complex_: SimplicialComplex) -> bool:
    rank, n_params = identifiability_rank(complex_)
    return rank == n_params
