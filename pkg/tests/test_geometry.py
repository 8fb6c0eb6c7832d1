import math

import numpy as np
import pytest

from wehrlab.combinatorics import Params
from wehrlab.geometry import (
    chord_to_geodesic,
    distance_to_V,
    geodesic,
    geodesic_from_X0,
    geodesic_to_chord,
    grid_sup,
    husimi_sup,
)
from wehrlab.state_space import (
    TangentVector,
    base_point,
    basis_state,
    coherent_state,
    from_coefficients,
    homogenize,
    random_normal_direction,
    random_state,
)


def test_chord_geodesic_conversion():
    assert chord_to_geodesic(2.0) == pytest.approx(math.pi)
    assert chord_to_geodesic(math.sqrt(2.0)) == pytest.approx(math.pi / 2)
    for g in np.linspace(0.0, math.pi, 7):
        assert chord_to_geodesic(geodesic_to_chord(g)) == pytest.approx(g, abs=1e-14)
    with pytest.raises(ValueError):
        chord_to_geodesic(2.1)
    with pytest.raises(ValueError):
        geodesic_to_chord(-0.1)


def test_coherent_state_has_unit_supremum():
    params = Params(2, 3)
    w = np.array([0.3 + 0.4j, -1.2])
    result = distance_to_V(coherent_state(params, w), seed=1)
    assert result.T == pytest.approx(1.0, abs=1e-10)
    assert result.D_euclid < 1e-4
    assert abs(np.vdot(result.argmax_v, homogenize(w))) == pytest.approx(1.0, abs=1e-6)


def test_monomial_distance(p12):
    result = distance_to_V(basis_state(p12, (1,)), seed=0)
    assert result.T == pytest.approx(0.5, abs=1e-10)
    assert result.D_euclid == pytest.approx(math.sqrt(2.0 - math.sqrt(2.0)), abs=1e-8)
    assert result.dist_geodesic == pytest.approx(math.pi / 4, abs=1e-6)
    assert result.n_starts_used == 33


def test_degenerate_maximum(p12):
    state = from_coefficients(p12, [1.0, 0.0, 1.0])
    result = husimi_sup(state, seed=3)
    assert result.T == pytest.approx(0.5, abs=1e-12)
    assert result.converged


def test_supremum_is_phase_invariant(p22, rng):
    state = random_state(p22, rng)
    rotated = from_coefficients(p22, np.exp(1j * rng.uniform(0, 2 * np.pi)) * state.coeffs)
    assert husimi_sup(rotated).T == pytest.approx(husimi_sup(state).T, abs=1e-10)


def test_optimizer_beats_grid():
    for N, M, seed in [(1, 4, 0), (2, 3, 1), (2, 4, 2)]:
        state = random_state(Params(N, M), seed)
        assert husimi_sup(state, seed=seed).T >= grid_sup(state) - 1e-12


@pytest.mark.parametrize("params", [Params(2, 2), Params(2, 3), Params(1, 5)])
def test_supremum_is_thread_invariant(params):
    state = random_state(params, 4)
    serial = husimi_sup(state)
    for threads in (4, 5):
        parallel = husimi_sup(state, threads=threads)
        assert parallel.T == serial.T
        assert parallel.converged == serial.converged
        np.testing.assert_array_equal(parallel.argmax_v, serial.argmax_v)


@pytest.mark.parametrize("N, M", [(2, 3), (2, 4), (3, 3)])
def test_random_states_reach_gradient_tolerance(N, M, caplog):
    for seed in range(4):
        result = husimi_sup(random_state(Params(N, M), seed), seed=seed)
        assert result.converged
        assert 0.0 < result.T <= 1.0
    assert "did not reach" not in caplog.text


def test_chord_arc_inequality():
    for seed in range(3):
        result = distance_to_V(random_state(Params(2, 2), seed))
        assert result.D_euclid <= result.dist_geodesic <= math.pi / 2 * result.D_euclid + 1e-15


def test_husimi_sup_needs_a_start(p12):
    with pytest.raises(ValueError):
        husimi_sup(base_point(p12), n_starts=0)


def test_geodesic_from_X0(p12):
    Y = TangentVector(p12, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(geodesic_from_X0(Y, 0.0).coeffs, base_point(p12).coeffs)
    np.testing.assert_allclose(geodesic_from_X0(Y, math.pi / 2).coeffs, [0.0, 0.0, 1.0], atol=1e-15)
    for t in np.linspace(-1.0, 3.0, 9):
        assert np.linalg.norm(geodesic_from_X0(Y, t).coeffs) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        geodesic_from_X0(TangentVector(p12, [0.0, 0.0, 2.0]), 0.1)


def test_geodesic_rejects_non_orthogonal_direction(p12):
    with pytest.raises(ValueError):
        geodesic(base_point(p12), [1.0, 0.0, 0.0], 0.1)


def test_normal_geodesic_bounds_distance(rng):
    params = Params(2, 3)
    v = np.array([1.0, 0.0, 0.0], dtype=complex)
    for t in (0.01, 0.1, 0.5):
        Y = TangentVector(params, random_normal_direction(params, v, rng))
        result = distance_to_V(geodesic_from_X0(Y, t))
        assert result.dist_geodesic <= t + 1e-6
