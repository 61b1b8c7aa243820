import os
import sys

import numpy as np
import pytest

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import (ConstraintViolatedError, DimensionMismatchError,
                         InvalidParamsError, NotPositiveDefiniteError,
                         SingularBlockError)
from core.evaluation import generate_ground_truth
from core.sgm_model import (PrecisionMatrix, SgmParams,
                            assemble_full_precision, covariance_from_precision,
                            edge_marginal_precision, factorized_edge_precision,
                            identifiability_rank, is_identifiable,
                            iter_samples, regression_decomposition, sample,
                            schur_complement)
from core.simplicial_complex import build_complex, random_complex


@pytest.fixture
def two_triangles():
    return build_complex(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
                         [(0, 1, 2), (0, 2, 3)])


@pytest.fixture
def params():
    # only the first triangle is filled
    return SgmParams(d_v=[0.3, 0.5, 0.4, 0.2], d_t=[0.6, 0.0], k=6.0)


def _random_instances(count, fill=0.5):
    for seed in range(count):
        complex_, flags = random_complex(4 + seed % 9, 0.5, fill, seed)
        if complex_.n_edges:
            yield complex_, generate_ground_truth(complex_, flags, seed=seed)


def test_params_validation():
    with pytest.raises(InvalidParamsError):
        SgmParams(d_v=[0.0, 1.0], d_t=[], k=1.0)
    with pytest.raises(InvalidParamsError):
        SgmParams(d_v=[1.0], d_t=[-0.1], k=1.0)
    with pytest.raises(InvalidParamsError):
        SgmParams(d_v=[1.0], d_t=[], k=0.0)


def test_params_dict_round_trip(params):
    restored = SgmParams.from_dict(params.to_dict())

    np.testing.assert_array_equal(restored.d_v, params.d_v)
    np.testing.assert_array_equal(restored.d_t, params.d_t)
    assert restored.k == params.k
    assert params.filled_triangles.tolist() == [0]


def test_params_dimension_check(two_triangles):
    wrong = SgmParams(d_v=[0.1, 0.1, 0.1], d_t=[0.1, 0.1], k=5.0)
    with pytest.raises(DimensionMismatchError):
        edge_marginal_precision(two_triangles, wrong)


def test_full_precision_layout(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)

    # the unfilled triangle carries no latent variable
    assert omega.dimension == 4 + 5 + 1
    assert omega.kind == 'full'
    assert omega.labels[:4] == ('v0', 'v1', 'v2', 'v3')
    assert omega.labels[-1] == 't0'
    np.testing.assert_allclose(omega.matrix[:4, :4], np.diag(1 / params.d_v))
    np.testing.assert_allclose(omega.matrix[:4, 4:9], -two_triangles.b1)
    np.testing.assert_allclose(omega.matrix[4:9, 4:9], 6.0 * np.eye(5))
    np.testing.assert_allclose(omega.matrix[4:9, 9], -two_triangles.b2[:, 0])


def test_full_precision_rejects_small_k(two_triangles):
    weak = SgmParams(d_v=[1.0, 1.0, 1.0, 1.0], d_t=[1.0, 1.0], k=0.5)
    with pytest.raises(NotPositiveDefiniteError):
        assemble_full_precision(two_triangles, weak)


def test_schur_complement_matches_closed_form(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)

    marginal = schur_complement(omega, omega.edge_indices())
    closed = edge_marginal_precision(two_triangles, params)

    assert marginal.kind == 'marginal'
    assert marginal.labels == closed.labels
    np.testing.assert_allclose(marginal.matrix, closed.matrix, atol=1e-12)


def test_schur_complement_matches_closed_form_on_random_complexes():
    checked = 0
    for complex_, truth in _random_instances(50):
        omega = assemble_full_precision(complex_, truth)

        marginal = schur_complement(omega, omega.edge_indices())
        closed = edge_marginal_precision(complex_, truth)

        np.testing.assert_allclose(marginal.matrix, closed.matrix, rtol=0,
                                   atol=1e-9 * truth.k)
        checked += 1
    assert checked >= 45


def test_marginal_covariance_is_covariance_sub_block(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)
    edges = omega.edge_indices()

    full_cov = covariance_from_precision(omega)
    edge_cov = covariance_from_precision(
        edge_marginal_precision(two_triangles, params))

    np.testing.assert_allclose(full_cov[np.ix_(edges, edges)], edge_cov,
                               atol=1e-12)


def test_schur_complement_singular_block():
    with pytest.raises(SingularBlockError):
        schur_complement(np.array([[1.0, 0.0], [0.0, 0.0]]), [0])


def test_factorized_precision_equals_closed_form(two_triangles, params):
    dt_v, dt_t = params.rescaled()

    product = factorized_edge_precision(two_triangles, dt_v, dt_t, params.k)
    closed = edge_marginal_precision(two_triangles, params)

    np.testing.assert_allclose(product.matrix, closed.matrix, atol=1e-12)


def test_factorized_precision_on_random_feasible_parameters():
    for complex_, truth in _random_instances(30, fill=1.0):
        dt_v, dt_t = truth.rescaled()

        product = factorized_edge_precision(complex_, dt_v, dt_t, truth.k)
        closed = edge_marginal_precision(complex_, truth)

        np.testing.assert_allclose(product.matrix, closed.matrix, rtol=0,
                                   atol=1e-9 * truth.k)


def test_factorized_precision_reports_violated_factor():
    single_edge = build_complex(2, [(0, 1)])
    # 1 - (0.6 + 0.6) < 0
    with pytest.raises(ConstraintViolatedError) as info:
        factorized_edge_precision(single_edge, [0.6, 0.6], [], 1.0)
    assert info.value.constraint == 'a'


def test_triangle_factor_violation():
    triangle = build_complex(3, [(0, 1), (0, 2), (1, 2)], [(0, 1, 2)])
    # the filled triangle has |c|^2 = 3, so d~_T must stay below 1/3
    with pytest.raises(ConstraintViolatedError) as info:
        factorized_edge_precision(triangle, [0.01, 0.01, 0.01], [0.5], 1.0)
    assert info.value.constraint == 'b'


def test_precision_matrix_rejects_asymmetry():
    with pytest.raises(DimensionMismatchError) as info:
        PrecisionMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]), 'edge')

    assert info.value.expected == 'symmetric'
    assert not isinstance(info.value, NotPositiveDefiniteError)


def test_sampling_is_deterministic(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)

    first = sample(omega, 50, seed=5)
    second = sample(omega, 50, seed=5)
    other = sample(omega, 50, seed=6)

    np.testing.assert_array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)
    assert first.labels == omega.labels
    assert first.m == 50


def test_iter_samples_chunks_match_single_draw(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)

    chunks = list(iter_samples(omega, 25, seed=1, chunk_size=10))

    assert [c.shape[0] for c in chunks] == [10, 10, 5]
    assert all(c.shape[1] == omega.dimension for c in chunks)
    np.testing.assert_allclose(np.vstack(chunks),
                               sample(omega, 25, seed=1).values,
                               rtol=0, atol=1e-12)


def test_edge_block_of_samples(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)

    draws = sample(omega, 10, seed=0).edge_block()

    assert draws.labels == ('e0', 'e1', 'e2', 'e3', 'e4')
    assert draws.values.shape == (10, 5)


@pytest.mark.slow
def test_sample_covariance_converges(two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)
    target = covariance_from_precision(omega)

    draws = sample(omega, 200000, seed=42).values
    empirical = draws.T @ draws / draws.shape[0]

    error = np.linalg.norm(empirical - target) / np.linalg.norm(target)
    assert error < 0.02


def test_identity_precision_draws_standard_normals():
    draws = sample(PrecisionMatrix(np.eye(6), 'full'), 200000, seed=13).values

    variances = draws.var(axis=0)
    correlations = np.corrcoef(draws, rowvar=False)[np.triu_indices(6, 1)]

    assert np.all((variances >= 0.98) & (variances <= 1.02))
    assert np.max(np.abs(correlations)) < 0.02


@pytest.mark.slow
def test_edge_samples_of_filled_triangle_follow_marginal():
    triangle = build_complex(3, [(0, 1), (0, 2), (1, 2)], [(0, 1, 2)])
    truth = SgmParams(d_v=[0.3, 0.4, 0.5], d_t=[0.6], k=4.0)
    omega = assemble_full_precision(triangle, truth)

    draws = sample(omega, 200000, seed=21).edge_block().values
    empirical = draws.T @ draws / draws.shape[0]

    target = covariance_from_precision(edge_marginal_precision(
        triangle, truth))
    np.testing.assert_allclose(empirical, target, rtol=0, atol=0.02)


def test_regression_form_coefficients(two_triangles, params):
    model = regression_decomposition(two_triangles, params)

    np.testing.assert_allclose(model.edge_from_vertex,
                               two_triangles.b1.T / params.k)
    np.testing.assert_allclose(model.vertex_from_edge,
                               np.diag(params.d_v) @ two_triangles.b1)
    np.testing.assert_allclose(model.edge_covariance, np.eye(5) / params.k)
    assert model.active_triangles.tolist() == [0]
    assert model.triangle_covariance.shape == (1, 1)


def test_regression_residuals_have_edge_innovation_variance(
        two_triangles, params):
    omega = assemble_full_precision(two_triangles, params)
    model = regression_decomposition(two_triangles, params)

    residuals = model.edge_residuals(sample(omega, 40000, seed=9))
    empirical = residuals.T @ residuals / residuals.shape[0]

    np.testing.assert_allclose(empirical, np.eye(5) / params.k, atol=0.01)


def test_regression_without_filled_triangles(two_triangles):
    empty = SgmParams(d_v=[0.3, 0.3, 0.3, 0.3], d_t=[0.0, 0.0], k=5.0)

    model = regression_decomposition(two_triangles, empty)

    assert model.edge_from_triangle is None
    assert model.triangle_from_edge is None


def test_identifiability_of_filled_triangle():
    # on a filled triangle B1^T B1 + B2 B2^T = 3 I, so k is confounded
    triangle = build_complex(3, [(0, 1), (0, 2), (1, 2)], [(0, 1, 2)])

    assert identifiability_rank(triangle) == (4, 5)
    assert not is_identifiable(triangle)


def test_identifiability_of_square_cycle():
    square = build_complex(4, [(0, 1), (1, 2), (2, 3), (0, 3)])

    assert identifiability_rank(square) == (5, 5)
    assert is_identifiable(square)
