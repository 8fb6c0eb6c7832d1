import logging

import numpy as np
import pytest

from wehrlab.combinatorics import Params
from wehrlab.measure import (
    BLOCK_SIZE,
    MonteCarloScheme,
    TensorScheme,
    entropy_G,
    integrate_combination,
    mu0,
    parse_scheme,
    sample_nu,
    sup_G,
)
from wehrlab.phi import parse_phi
from wehrlab.state_space import base_point, basis_state, coherent_state, random_state


def test_parse_scheme():
    assert parse_scheme("mc:1000:7") == MonteCarloScheme(1000, 7)
    assert parse_scheme("mc:1e5:0") == MonteCarloScheme(100_000, 0)
    assert parse_scheme("tensor:32:9") == TensorScheme(32, 9)
    assert parse_scheme("tensor:32").angular_nodes(Params(1, 2)) == 9
    assert parse_scheme("tensor:32:9").spec == "tensor:32:9"


@pytest.mark.parametrize("spec", ["mc", "mc:0:1", "mc:x:1", "tensor:0", "grid:10", "tensor:1:2:3"])
def test_parse_scheme_rejects(spec):
    with pytest.raises(ValueError):
        parse_scheme(spec)


def test_tensor_scheme_needs_one_dimension(p22, pow2):
    with pytest.raises(ValueError):
        entropy_G(base_point(p22), pow2, TensorScheme())


def test_sample_nu_is_deterministic_and_thread_invariant(p22):
    n = 2 * BLOCK_SIZE + 17
    a = sample_nu(p22, 3, n)
    b = sample_nu(p22, 3, n, threads=4)
    assert a.shape == (n, 2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_nu(p22, 4, n))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_sample_nu_radial_law(N):
    params = Params(N, 2)
    n = 200_000
    z = sample_nu(params, 11, n)
    t = np.sum(np.abs(z) ** 2, axis=1)
    t = t / (1.0 + t)
    mean = N / (N + 1)
    stderr = np.sqrt(N / ((N + 1) ** 2 * (N + 2)) / n)
    assert abs(t.mean() - mean) < 4.0 * stderr


def test_mu0(p12):
    assert mu0(p12, 0.25) == pytest.approx(0.5)
    assert mu0(p12, 1.0) == 0.0
    assert mu0(Params(2, 2), 0.0) == 1.0
    with pytest.raises(ValueError):
        mu0(p12, 1.5)


def test_sup_G_closed_forms(p12, p22, pow2):
    assert sup_G(p12, pow2) == pytest.approx(1.0 / 5.0, abs=1e-12)
    assert sup_G(p22, pow2) == pytest.approx(1.0 / 15.0, abs=1e-12)
    assert sup_G(p22, parse_phi("affine:2,1")) == pytest.approx(2.0 / 6.0 + 1.0, abs=1e-12)


def test_tensor_entropy_exact_for_power_two(p12, pow2):
    value, error = entropy_G(base_point(p12), pow2, TensorScheme())
    assert value == pytest.approx(1.0 / 5.0, abs=1e-12)
    assert error < 1e-12
    value, _ = entropy_G(basis_state(p12, (1,)), pow2, TensorScheme())
    assert value == pytest.approx(2.0 / 15.0, abs=1e-12)


@pytest.mark.parametrize("spec", ["pow:2", "pow:3"])
def test_entropy_is_the_same_for_every_coherent_state(p12, spec):
    phi = parse_phi(spec)
    values = [entropy_G(coherent_state(p12, [w]), phi, TensorScheme()).value for w in (0.0, 1.0, 2.0 + 1.0j)]
    assert values == pytest.approx([sup_G(p12, phi)] * 3, abs=1e-11)


def test_monte_carlo_entropy_within_error(p12, pow2):
    value, error = entropy_G(basis_state(p12, (1,)), pow2, MonteCarloScheme(100_000, 5))
    assert abs(value - 2.0 / 15.0) < 4.0 * error
    assert 0.0 < error < 1e-3


def test_monte_carlo_is_thread_invariant(p22, pow2):
    state = random_state(p22, 1)
    scheme = MonteCarloScheme(3 * BLOCK_SIZE + 100, 2)
    assert entropy_G(state, pow2, scheme) == entropy_G(state, pow2, scheme, threads=3)


def test_affine_phi_gives_constant_entropy(p22):
    phi = parse_phi("affine:2,1")
    value, error = entropy_G(random_state(p22, 3), phi, MonteCarloScheme(50_000, 0))
    assert abs(value - (2.0 / 6.0 + 1.0)) < 4.0 * error + 1e-12


def test_integrate_combination_on_common_nodes(p22, pow2):
    state = random_state(p22, 9)
    value, error = integrate_combination([state, state], [1.0, -1.0], pow2, MonteCarloScheme(10_000, 0))
    assert value == 0.0 and error == 0.0
    with pytest.raises(ValueError):
        integrate_combination([state], [1.0, 2.0], pow2, MonteCarloScheme(10, 0))
    with pytest.raises(ValueError):
        integrate_combination([state, base_point(Params(2, 3))], [1.0, 1.0], pow2, MonteCarloScheme(10, 0))


def test_tensor_with_kinked_phi_falls_back(p12, caplog):
    phi = parse_phi("hinge:0.5")
    with caplog.at_level(logging.WARNING):
        value, error = entropy_G(base_point(p12), phi, TensorScheme())
    assert "tensor quadrature replaced" in caplog.text
    assert abs(value - sup_G(p12, phi)) < 4.0 * error
