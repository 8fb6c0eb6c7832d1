import numpy as np
import pytest
from scipy.integrate import quad

from wehrlab.combinatorics import Params, c_tilde_sq_by_degree
from wehrlab.hessian import (
    b_alpha,
    b_alpha_direct,
    bracket,
    d2G_closed_form,
    d2G_finite_difference,
    degree_kernel,
    h_tilde,
    h_tilde_as_printed,
    h_tilde_integral,
    hessian_coefficients,
)
from wehrlab.measure import MonteCarloScheme
from wehrlab.phi import parse_phi
from wehrlab.state_space import TangentVector, random_normal_direction


def normal_at_X0(params, rng):
    v = np.eye(params.N + 1, dtype=complex)[0]
    return TangentVector(params, random_normal_direction(params, v, rng))


def test_known_coefficients(p12, p13, pow2):
    assert b_alpha(p12, pow2, (2,)) == pytest.approx(-4.0 / 15.0, abs=1e-10)
    assert b_alpha(p13, pow2, (3,)) == pytest.approx(-9.0 / 35.0, abs=1e-10)


@pytest.mark.parametrize("spec", ["pow:2", "pow:3", "xlogx", "mollify:0.05,hinge:0.5", "hinge:0.3"])
@pytest.mark.parametrize("N, M", [(1, 2), (2, 3), (3, 5)])
def test_sign_dichotomy(spec, N, M):
    params = Params(N, M)
    coefficients = hessian_coefficients(params, parse_phi(spec)).by_degree
    assert abs(coefficients[1]) <= 1e-10
    for K in range(2, M + 1):
        assert coefficients[K] < -1e-6


def test_coefficients_depend_on_degree_only(pow2):
    params = Params(2, 3)
    assert b_alpha(params, pow2, (2, 0)) == b_alpha(params, pow2, (1, 1)) == b_alpha(params, pow2, (0, 2))
    assert set(hessian_coefficients(params, pow2).b) == {a for a in params.index_order if sum(a) > 0}


def test_zero_index_rejected(p12, pow2):
    with pytest.raises(ValueError):
        b_alpha(p12, pow2, (0,))
    with pytest.raises(ValueError):
        b_alpha(p12, pow2, (3,))


def test_substitution_matches_s_integral(pow2):
    for N, M in [(1, 2), (2, 3), (3, 4)]:
        params = Params(N, M)
        for K in range(1, M + 1):
            assert b_alpha(params, pow2, (K,) + (0,) * (N - 1)) == pytest.approx(
                b_alpha_direct(params, pow2, K), abs=1e-9
            )


def test_hinge_coefficient_is_kernel_at_atom(p12):
    T = 0.3
    assert b_alpha(p12, parse_phi(f"hinge:{T}"), (2,)) == pytest.approx(degree_kernel(p12, 2)(T), abs=1e-15)


def test_bracket_is_negative():
    s = np.logspace(-4, 4, 161)
    for N, M in [(1, 2), (2, 4), (3, 5)]:
        params = Params(N, M)
        np.testing.assert_allclose(bracket(params, 1, s) / (1.0 + s) ** N, 0.0, atol=1e-12)
        for K in range(2, M + 1):
            assert np.all(bracket(params, K, s) < 0.0)


def test_kernel_equals_bracket_form():
    params = Params(2, 3)
    N, M = params.N, params.M
    for K in range(1, M + 1):
        for tau in (0.1, 0.3, 0.8):
            x = tau ** (1.0 / M)
            s = 1.0 / x - 1.0
            expected = N * c_tilde_sq_by_degree(K, M, N) * x ** (M + N) * bracket(params, K, s) / M
            assert degree_kernel(params, K)(tau) == pytest.approx(expected, abs=1e-13)


def test_closed_form_examples(p12, pow2):
    Y = TangentVector(p12, [0.0, 0.0, 1.0])
    assert d2G_closed_form(p12, pow2, Y) == pytest.approx(-8.0 / 15.0, abs=1e-10)
    rotated = TangentVector(p12, [0.0, 0.0, np.exp(0.7j)])
    assert d2G_closed_form(p12, pow2, rotated) == pytest.approx(-8.0 / 15.0, abs=1e-10)
    tangent = TangentVector(p12, [0.6j, 0.8, 0.0])
    assert d2G_closed_form(p12, pow2, tangent) == pytest.approx(0.0, abs=1e-10)


def test_h_tilde_sign_and_support(rng, pow2):
    params = Params(2, 3)
    Y = normal_at_X0(params, rng)
    for tau in np.linspace(0.1, 0.9, 9):
        assert h_tilde(params, tau, Y) < 0.0
    first_degree = TangentVector(params, [0.0, 0.6, 0.8j, 0, 0, 0, 0, 0, 0, 0])
    assert h_tilde(params, 0.4, first_degree) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        h_tilde(params, 1.0, Y)
    assert np.isfinite(h_tilde_as_printed(params, 0.4, Y))


def test_h_tilde_integral_identity(rng, pow2):
    params = Params(2, 3)
    for _ in range(5):
        Y = normal_at_X0(params, rng)
        integral, _ = quad(lambda tau: 2.0 * h_tilde(params, tau, Y), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
        assert integral == pytest.approx(d2G_closed_form(params, pow2, Y), rel=1e-7)


def test_h_tilde_identity_for_mollified_hinge(rng):
    params = Params(1, 3)
    phi = parse_phi("mollify:0.05,hinge:0.5")
    for _ in range(3):
        Y = normal_at_X0(params, rng)
        integral, _ = h_tilde_integral(params, phi, Y)
        assert integral == pytest.approx(d2G_closed_form(params, phi, Y), rel=1e-6)


def test_finite_difference_matches_closed_form(p12, p13, pow2, rng):
    Y = TangentVector(p12, [0.0, 0.0, 1.0])
    value, noise = d2G_finite_difference(p12, pow2, Y)
    assert value == pytest.approx(-8.0 / 15.0, rel=1e-3)
    assert noise < 0.02**2

    mixed = TangentVector(p13, np.array([0.0, 0.0, 0.6, 0.8j]))
    value, _ = d2G_finite_difference(p13, pow2, mixed)
    assert value == pytest.approx(d2G_closed_form(p13, pow2, mixed), rel=1e-3)

    for _ in range(5):
        Y = normal_at_X0(p13, rng)
        value, _ = d2G_finite_difference(p13, pow2, Y, h=0.05)
        assert value == pytest.approx(d2G_closed_form(p13, pow2, Y), rel=1e-3)


def test_phase_direction_is_flat(p12, pow2):
    Y = TangentVector(p12, [1j, 0.0, 0.0])
    value, _ = d2G_finite_difference(p12, pow2, Y)
    assert value == pytest.approx(0.0, abs=1e-8)


def test_finite_difference_rejects_bad_step(p12, pow2):
    Y = TangentVector(p12, [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        d2G_finite_difference(p12, pow2, Y, h=0.2)
    with pytest.raises(ValueError):
        d2G_finite_difference(p12, pow2, TangentVector(p12, [0.0, 0.0, 0.5]))


@pytest.mark.slow
def test_finite_difference_with_monte_carlo(p22, pow2, rng):
    for _ in range(3):
        Y = normal_at_X0(p22, rng)
        closed = d2G_closed_form(p22, pow2, Y)
        value, noise = d2G_finite_difference(p22, pow2, Y, scheme=MonteCarloScheme(400_000, 1))
        assert abs(value - closed) <= max(1e-3 * abs(closed), 5.0 * noise)


def test_mollified_hinge_coefficients_are_accurate(caplog):
    params = Params(2, 4)
    phi = parse_phi("mollify:0.05,hinge:0.5")
    coefficients = hessian_coefficients(params, phi)
    assert max(coefficients.error_by_degree.values()) <= 1e-10
    assert "quadrature error" not in caplog.text
    assert all(coefficients.by_degree[K] < 0.0 for K in range(2, params.M + 1))
