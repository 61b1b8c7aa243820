# -*- coding: utf-8 -*-
"""
core/simplicial_complex.py

Order-2 simplicial complexes: validation, incidence matrices, Hodge
Laplacians, the orthogonal Hodge decomposition of edge signals, 3-clique
enumeration and the random complex generator used by the experiments.

Orientation convention: edge (i, j) with i < j is oriented i -> j and
triangle (i, j, k) with i < j < k is oriented i -> j -> k. Incidence matrices
have faces as rows, so B1 is |V| x |E| and B2 is |E| x |T|.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np
import scipy.linalg

from core.errors import (DanglingFaceError, DimensionMismatchError,
                         DuplicateSimplexError, IndexOutOfRangeError,
                         InvalidComplexError)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
Triangle = Tuple[int, int, int]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SimplicialComplex:
    """
    A validated 2-dimensional simplicial complex.

    Instances are created through ``build_complex`` which sorts and checks the
    simplices; the constructor itself does not validate. Edges and triangles
    are stored as lexicographically sorted tuples of sorted vertex tuples.
    """

    n_vertices: int
    edges: Tuple[Edge, ...] = ()
    triangles: Tuple[Triangle, ...] = ()

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def edge_index(self) -> Dict[Edge, int]:
        """Map from edge tuple to its column in B1 / row in B2."""
        return {edge: idx for idx, edge in enumerate(self.edges)}

    @cached_property
    def incidence(self) -> "IncidenceMatrices":
        return incidence_matrices(self)

    @property
    def b1(self) -> np.ndarray:
        return self.incidence.b1

    @property
    def b2(self) -> np.ndarray:
        return self.incidence.b2

    def to_graph(self) -> nx.Graph:
        """Return the 1-skeleton as a networkx graph on 0..n_vertices-1."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        graph.add_edges_from(self.edges)
        return graph

    @classmethod
    def from_graph(cls,
                   graph: nx.Graph,
                   triangles: Iterable[Sequence[int]] = ()
                   ) -> "SimplicialComplex":
        """
        Build a complex from a networkx graph whose nodes are 0..n-1.

        Args:
            graph (nx.Graph): The 1-skeleton.
            triangles: Optional triangles to attach to the skeleton.

        Returns:
            SimplicialComplex: The validated complex.
        """
        return build_complex(graph.number_of_nodes(), list(graph.edges()),
                             triangles)


class IncidenceMatrices(NamedTuple):
    """Signed incidence matrices B1 (|V| x |E|) and B2 (|E| x |T|)."""
    b1: np.ndarray
    b2: np.ndarray


class HodgeLaplacians(NamedTuple):
    l0: np.ndarray
    l1_down: np.ndarray
    l1_up: np.ndarray
    l1: np.ndarray
    l2: np.ndarray


@dataclass(frozen=True)
class HodgeDecomposition:
    """
    Orthogonal split of an edge signal into gradient, solenoidal and harmonic
    parts, together with the least-squares potentials that generate the first
    two.
    """

    gradient: np.ndarray
    solenoidal: np.ndarray
    harmonic: np.ndarray
    vertex_potential: np.ndarray = field(repr=False)
    triangle_potential: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        return self.gradient + self.solenoidal + self.harmonic


class RandomComplex(NamedTuple):
    """A generated complex whose triangles are all 3-cliques, and which of
    them are filled in the ground truth."""
    complex: SimplicialComplex
    flags: np.ndarray


def _canonical(simplex: Sequence[int], size: int, n_vertices: int) -> tuple:
    try:
        vertices = tuple(int(v) for v in simplex)
    except (TypeError, ValueError) as exc:
        raise InvalidComplexError("Simplex %r is not a sequence of integer "
                                  "vertex indices." % (simplex, )) from exc
    if len(vertices) != size:
        raise InvalidComplexError("Simplex %r should have %d vertices." %
                                  (simplex, size))
    if any(v < 0 or v >= n_vertices for v in vertices):
        raise IndexOutOfRangeError(vertices, n_vertices)
    if len(set(vertices)) != size:
        raise InvalidComplexError("Simplex %r repeats a vertex." %
                                  (simplex, ))
    return tuple(sorted(vertices))


def _sorted_unique(simplices: Iterable[Sequence[int]], size: int,
                   n_vertices: int) -> tuple:
    seen = set()
    for simplex in simplices:
        canonical = _canonical(simplex, size, n_vertices)
        if canonical in seen:
            raise DuplicateSimplexError(canonical)
        seen.add(canonical)
    return tuple(sorted(seen))


def build_complex(n_vertices: int,
                  edges: Iterable[Sequence[int]] = (),
                  triangles: Iterable[Sequence[int]] = ()
                  ) -> SimplicialComplex:
    """
    Validate and canonicalise a 2-dimensional simplicial complex.

    Args:
        n_vertices (int): Number of vertices, indexed 0..n_vertices-1.
        edges: Vertex pairs, in any order and orientation.
        triangles: Vertex triples, in any order and orientation.

    Returns:
        SimplicialComplex: The complex with sorted simplices.

    Raises:
        IndexOutOfRangeError: A simplex references an unknown vertex.
        DuplicateSimplexError: A simplex is listed twice.
        DanglingFaceError: A triangle has a face missing from ``edges``.
    """
    if isinstance(n_vertices, bool) or int(n_vertices) != n_vertices \
            or n_vertices < 1:
        raise InvalidComplexError("n_vertices must be a positive integer, "
                                  "got %r." % (n_vertices, ))
    n_vertices = int(n_vertices)
    sorted_edges = _sorted_unique(edges, 2, n_vertices)
    sorted_triangles = _sorted_unique(triangles, 3, n_vertices)

    edge_set = set(sorted_edges)
    for triangle in sorted_triangles:
        for face in itertools.combinations(triangle, 2):
            if face not in edge_set:
                raise DanglingFaceError(triangle, face)

    return SimplicialComplex(n_vertices=n_vertices,
                             edges=sorted_edges,
                             triangles=sorted_triangles)


def with_triangles(complex_: SimplicialComplex,
                   triangles: Iterable[Sequence[int]]) -> SimplicialComplex:
    """Return a copy of ``complex_`` carrying a different triangle set."""
    return build_complex(complex_.n_vertices, complex_.edges, triangles)


def incidence_matrices(complex_: SimplicialComplex) -> IncidenceMatrices:
    """
    Build the signed incidence matrices of ``complex_``.

    B1[v, e] is -1 on the smaller endpoint of e and +1 on the larger one.
    The boundary of triangle (i, j, k) is [j,k] - [i,k] + [i,j], which fixes
    the signs of B2 and gives B1 @ B2 == 0.
    """
    b1 = np.zeros((complex_.n_vertices, complex_.n_edges), dtype=np.int64)
    for col, (i, j) in enumerate(complex_.edges):
        b1[i, col] = -1
        b1[j, col] = 1

    b2 = np.zeros((complex_.n_edges, complex_.n_triangles), dtype=np.int64)
    index = complex_.edge_index
    for col, (i, j, k) in enumerate(complex_.triangles):
        b2[index[(i, j)], col] = 1
        b2[index[(i, k)], col] = -1
        b2[index[(j, k)], col] = 1

    return IncidenceMatrices(_readonly(b1), _readonly(b2))


def hodge_laplacians(complex_: SimplicialComplex) -> HodgeLaplacians:
    """Return (L0, L1_down, L1_up, L1, L2) built from B1 and B2."""
    b1, b2 = complex_.incidence
    l1_down = b1.T @ b1
    l1_up = b2 @ b2.T
    return HodgeLaplacians(l0=b1 @ b1.T,
                           l1_down=l1_down,
                           l1_up=l1_up,
                           l1=l1_down + l1_up,
                           l2=b2.T @ b2)


def betti_numbers(complex_: SimplicialComplex) -> Tuple[int, int, int]:
    """Return (b0, b1, b2) from the ranks of the incidence matrices."""
    b1, b2 = complex_.incidence
    rank1 = int(np.linalg.matrix_rank(b1)) if b1.size else 0
    rank2 = int(np.linalg.matrix_rank(b2)) if b2.size else 0
    return (complex_.n_vertices - rank1,
            complex_.n_edges - rank1 - rank2,
            complex_.n_triangles - rank2)


def _least_squares_image(operator: np.ndarray,
                         signal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Project ``signal`` onto im(operator); return (projection, coefficients)."""
    n_rows, n_cols = operator.shape
    if n_rows == 0 or n_cols == 0:
        return np.zeros(n_rows), np.zeros(n_cols)
    coefficients, _, _, _ = scipy.linalg.lstsq(operator.astype(float),
                                               signal,
                                               lapack_driver='gelsd')
    return operator @ coefficients, coefficients


def hodge_decompose(complex_: SimplicialComplex,
                    x_e: Sequence[float]) -> HodgeDecomposition:
    """
    Split an edge signal into gradient, solenoidal and harmonic components.

    The gradient part is B1^T x_V with x_V a least-squares solution of
    min ||B1^T x_V - x_E||, the solenoidal part is B2 x_T with x_T solving
    min ||B2 x_T - x_E||, and the harmonic part is what remains.

    Raises:
        DimensionMismatchError: ``x_e`` does not have one entry per edge.
    """
    signal = np.asarray(x_e, dtype=float)
    if signal.ndim != 1 or signal.shape[0] != complex_.n_edges:
        raise DimensionMismatchError("edge signal", complex_.n_edges,
                                     signal.shape)
    b1, b2 = complex_.incidence
    gradient, vertex_potential = _least_squares_image(b1.T, signal)
    solenoidal, triangle_potential = _least_squares_image(b2, signal)
    harmonic = signal - gradient - solenoidal
    return HodgeDecomposition(gradient=gradient,
                              solenoidal=solenoidal,
                              harmonic=harmonic,
                              vertex_potential=vertex_potential,
                              triangle_potential=triangle_potential)


def enumerate_3cliques(complex_: SimplicialComplex) -> Tuple[Triangle, ...]:
    """
    List every vertex triple whose three edges are in the 1-skeleton.

    Triangles already attached to ``complex_`` are ignored.
    """
    triples = []
    for clique in nx.enumerate_all_cliques(complex_.to_graph()):
        # cliques are produced in order of increasing size
        if len(clique) > 3:
            break
        if len(clique) == 3:
            triples.append(tuple(sorted(int(v) for v in clique)))
    return tuple(sorted(triples))


def random_complex(n_vertices: int, q: float, p: float,
                   seed: int) -> RandomComplex:
    """
    Draw a random 2-complex: an Erdos-Renyi 1-skeleton with edge probability
    ``q`` whose 3-cliques all become candidate triangles, of which a uniformly
    random floor(p * K) subset is flagged as filled.

    Args:
        n_vertices (int): Number of vertices.
        q (float): Independent edge probability.
        p (float): Fraction of 3-cliques to fill.
        seed (int): Seed for both the graph and the filled subset.

    Returns:
        RandomComplex: (complex with all K candidates, boolean flags).
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("Edge probability q must be in [0, 1], got %r." % q)
    if not 0.0 <= p <= 1.0:
        raise ValueError("Fill fraction p must be in [0, 1], got %r." % p)

    rng = np.random.default_rng(seed)
    graph_seed = int(rng.integers(0, 2**31 - 1))
    graph = nx.gnp_random_graph(n_vertices, q, seed=graph_seed)
    skeleton = SimplicialComplex.from_graph(graph)

    candidates = enumerate_3cliques(skeleton)
    n_candidates = len(candidates)
    n_filled = int(np.floor(p * n_candidates))
    flags = np.zeros(n_candidates, dtype=bool)
    if n_filled:
        flags[rng.choice(n_candidates, size=n_filled, replace=False)] = True

    logger.debug(
        "Random complex (n=%d, q=%.3f, p=%.3f, seed=%d): %d edges, "
        "%d candidate triangles, %d filled.", n_vertices, q, p, seed,
        skeleton.n_edges, n_candidates, n_filled)
    return RandomComplex(with_triangles(skeleton, candidates), flags)
