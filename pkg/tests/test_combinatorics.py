import math

import numpy as np
import pytest
from scipy.integrate import quad

from wehrlab.combinatorics import (
    A_const,
    Params,
    binomial,
    c_alpha,
    c_tilde_sq,
    c_tilde_sq_by_degree,
    enumerate_multi_indices,
    incomplete_beta_primitive,
    multinomial,
)


def test_index_order_is_graded_lex():
    assert enumerate_multi_indices(1, 2) == [(0,), (1,), (2,)]
    assert enumerate_multi_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("N, M, d", [(1, 2, 3), (2, 2, 6), (3, 4, 35)])
def test_dimension(N, M, d):
    params = Params(N, M)
    assert params.d == d
    assert len(params.index_order) == d
    assert params.index_order[0] == (0,) * N


def test_invalid_sizes_rejected():
    with pytest.raises(ValueError):
        enumerate_multi_indices(0, 2)
    with pytest.raises(ValueError):
        enumerate_multi_indices(1, -1)
    with pytest.raises(ValueError):
        Params(0, 2)
    with pytest.raises(ValueError):
        Params(1, 0)


def test_binomial_large_arguments_use_log_gamma():
    assert binomial(70, 3) == pytest.approx(math.comb(70, 3), rel=1e-12)
    assert binomial(5, 7) == 0


def test_basis_normalization():
    assert c_alpha((1,), 2) == pytest.approx(math.sqrt(2))
    assert multinomial((1, 1), 2) == 2
    assert c_alpha((0, 0), 3) == 1.0
    with pytest.raises(ValueError):
        c_alpha((2, 1), 2)


def test_A_constant():
    assert A_const(2, 1, 2) == 3
    assert A_const(2, 1, 1) == 6
    for N, M in [(1, 2), (2, 2), (3, 4)]:
        params = Params(N, M)
        assert A_const(M, N, 0) == params.d * N
    with pytest.raises(ValueError):
        A_const(2, 1, 3)


def test_c_tilde_is_ratio_of_A_constants():
    for N in range(1, 5):
        for M in range(1, 7):
            for K in range(M + 1):
                expected = A_const(M, N, K) / A_const(M, N, 0)
                assert c_tilde_sq_by_degree(K, M, N) == pytest.approx(expected, abs=1e-14)


def test_c_tilde_depends_on_degree_only():
    assert c_tilde_sq((2, 0), 3, 2) == c_tilde_sq((1, 1), 3, 2) == c_tilde_sq((0, 2), 3, 2)


@pytest.mark.parametrize("N, M", [(1, 2), (2, 3), (3, 5), (4, 6)])
def test_incomplete_beta_primitive_matches_quadrature(N, M):
    for K in range(M + 1):
        for s in (0.1, 0.5, 1.0, 2.0, 10.0, math.inf):
            expected, _ = quad(
                lambda sigma: sigma ** (K + N - 1) / (1.0 + sigma) ** (M + N + 1),
                0.0,
                s,
                epsabs=1e-15,
                epsrel=1e-13,
                limit=200,
            )
            assert incomplete_beta_primitive(M, N, K, s) == pytest.approx(expected, rel=1e-10)


def test_incomplete_beta_primitive_limits():
    assert incomplete_beta_primitive(3, 2, 1, 0.0) == 0.0
    assert incomplete_beta_primitive(3, 2, 1, math.inf) == pytest.approx(1.0 / A_const(3, 2, 1))
    with pytest.raises(ValueError):
        incomplete_beta_primitive(3, 2, 1, -0.5)


def test_homogeneous_exponents_have_total_degree_M():
    params = Params(2, 3)
    assert np.all(params.homogeneous_exponents.sum(axis=1) == 3)
    assert params.position[(1, 1)] == params.index_order.index((1, 1))
