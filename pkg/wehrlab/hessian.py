"""Second differential of G at X₀ = (1, 0, …, 0) and its numerical cross-checks.

At X₀ the second differential is diagonal in the monomial basis:
½ d²G(Y) = Σ_{α≠0} b_α |Y_α|², with b_α depending on α only through K = |α|.
Writing x = τ^{1/M} for τ = (1+s)^{−M}, the coefficient is b_K = ∫ g_K(τ) dΦ″(τ)
with the degree kernel

    g_K(τ) = N c̃²_K [x^{M+1−K}(1−x)^{K+N−1}/M − Σ_{j=N}^{K+N−1} C(M+N,j) x^{M+N−j}(1−x)^j / A_{M,N,K}]

which is the bracket polynomial in s = τ^{−1/M} − 1 times N c̃²_K x^{M+N}/M.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad

from wehrlab.combinatorics import A_const, MultiIndex, Params, binomial, c_tilde_sq_by_degree
from wehrlab.geometry import geodesic_from_X0
from wehrlab.logging_config import get_logger
from wehrlab.measure import (
    Estimate,
    MonteCarloScheme,
    QuadratureScheme,
    TensorScheme,
    integrate_combination,
)
from wehrlab.phi import ConvexPhi
from wehrlab.state_space import TangentVector

logger = get_logger(__name__)

DEFAULT_STEP = 0.02
MAX_STEP = 0.1
FD_MONTE_CARLO_SAMPLES = 1 << 20
FD_TENSOR_ORDER = 64

# Richardson-combined second difference over {±h, ±h/2, 0}, in units of 1/h².
_FD_OFFSETS = (1.0, -1.0, 0.5, -0.5, 0.0)
_FD_WEIGHTS = (-1.0 / 3.0, -1.0 / 3.0, 16.0 / 3.0, 16.0 / 3.0, -10.0)


@dataclass(frozen=True)
class HessianCoefficients:
    params: Params
    phi_id: str
    by_degree: dict[int, float]
    error_by_degree: dict[int, float] = field(repr=False)

    @property
    def b(self) -> dict[MultiIndex, float]:
        return {alpha: self.by_degree[sum(alpha)] for alpha in self.params.index_order if sum(alpha) > 0}

    @property
    def quadrature_error(self) -> dict[MultiIndex, float]:
        return {alpha: self.error_by_degree[sum(alpha)] for alpha in self.params.index_order if sum(alpha) > 0}

    def to_dict(self) -> dict:
        return {
            "phi": self.phi_id,
            "N": self.params.N,
            "M": self.params.M,
            "by_degree": {str(K): value for K, value in sorted(self.by_degree.items())},
            "quadrature_error": {str(K): err for K, err in sorted(self.error_by_degree.items())},
        }


def _check_degree(params: Params, K: int) -> None:
    if K == 0:
        raise ValueError("b_α is not defined for α = 0")
    if not 1 <= K <= params.M:
        raise ValueError(f"|α| must satisfy 1 ≤ |α| ≤ M = {params.M}, got {K}")


def bracket(params: Params, K: int, s: ArrayLike):
    """s^{K+N−1} − (M/A_{M,N,K}) Σ_{j=N}^{K+N−1} C(M+N, j) s^j."""
    N, M = params.N, params.M
    s = np.asarray(s, dtype=float)
    A = A_const(M, N, K)
    total = s ** (K + N - 1) - (M / A) * sum(binomial(M + N, j) * s**j for j in range(N, K + N))
    return total[()] if total.ndim == 0 else total


def degree_kernel(params: Params, K: int):
    """Vectorised g_K(τ) on [0, 1], written in x = τ^{1/M} so both endpoints are regular."""
    N, M = params.N, params.M
    scale = N * c_tilde_sq_by_degree(K, M, N)
    inv_A = 1.0 / A_const(M, N, K)
    terms = [(binomial(M + N, j) * inv_A, M + N - j, j) for j in range(N, K + N)]

    def kernel(tau):
        x = np.asarray(tau, dtype=float) ** (1.0 / M)
        y = 1.0 - x
        value = x ** (M + 1 - K) * y ** (K + N - 1) / M
        for weight, px, py in terms:
            value = value - weight * x**px * y**py
        value = scale * value
        return value[()] if value.ndim == 0 else value

    return kernel


@lru_cache(maxsize=256)
def _degree_coefficient(params: Params, phi: ConvexPhi, K: int) -> tuple[float, float]:
    value, error = phi.integrate_curvature(degree_kernel(params, K), power=params.M)
    if error > 1e-10:
        logger.warning("b for |α|=%d under Φ=%s has quadrature error %.2e", K, phi.spec, error)
    return value, error


def b_alpha(params: Params, phi: ConvexPhi, alpha: MultiIndex) -> float:
    """Coefficient b_α of |Y_α|² in ½ d²_{X₀}G(Y).

    Raises:
        ValueError: For α = 0 or |α| > M.
    """
    K = sum(alpha)
    _check_degree(params, K)
    return _degree_coefficient(params, phi, K)[0]


def hessian_coefficients(params: Params, phi: ConvexPhi, threads: int = 1) -> HessianCoefficients:
    degrees = range(1, params.M + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(lambda K: _degree_coefficient(params, phi, K), degrees))
    else:
        results = [_degree_coefficient(params, phi, K) for K in degrees]
    return HessianCoefficients(
        params=params,
        phi_id=phi.spec,
        by_degree={K: value for K, (value, _) in zip(degrees, results)},
        error_by_degree={K: error for K, (_, error) in zip(degrees, results)},
    )


def d2G_closed_form(params: Params, phi: ConvexPhi, Y: TangentVector) -> float:
    """d²_{X₀}G(Y) = 2 Σ_{α≠0} b_α |Y_α|²."""
    if Y.params != params:
        raise ValueError("tangent vector belongs to different (N, M)")
    weights = Y.weights_by_degree()
    return 2.0 * sum(_degree_coefficient(params, phi, K)[0] * weights[K] for K in range(1, params.M + 1))


def _default_fd_scheme(params: Params, phi: ConvexPhi) -> QuadratureScheme:
    if params.N == 1 and not phi.atoms:
        return TensorScheme(FD_TENSOR_ORDER)
    return MonteCarloScheme(FD_MONTE_CARLO_SAMPLES, 0)


def d2G_finite_difference(
    params: Params,
    phi: ConvexPhi,
    Y: TangentVector,
    h: float = DEFAULT_STEP,
    scheme: QuadratureScheme | None = None,
    threads: int = 1,
) -> Estimate:
    """Second derivative of t ↦ G(cos t·X₀ + sin t·Y) at t = 0.

    Central differences at steps h and h/2 combined by Richardson
    extrapolation, all five states integrated on common nodes.

    Returns:
        Estimate of the value and its quadrature noise.

    Raises:
        ValueError: If h ∉ (0, 0.1] or Y is not a unit vector.
    """
    if not 0.0 < h <= MAX_STEP:
        raise ValueError(f"h must lie in (0, {MAX_STEP}], got {h}")
    if abs(Y.norm - 1.0) > 1e-10:
        raise ValueError(f"Y must be a unit vector, got norm {Y.norm:.12g}")
    if Y.params != params:
        raise ValueError("tangent vector belongs to different (N, M)")
    scheme = scheme or _default_fd_scheme(params, phi)
    states = [geodesic_from_X0(Y, offset * h) for offset in _FD_OFFSETS]
    weights = [w / (h * h) for w in _FD_WEIGHTS]
    estimate = integrate_combination(states, weights, phi, scheme, threads)
    if estimate.error > h * h:
        logger.warning(
            "finite-difference noise %.2e exceeds h²=%.2e; tighten the quadrature", estimate.error, h * h
        )
    return estimate


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ValueError(f"τ must lie in (0, 1), got {tau}")


def h_tilde(params: Params, tau: float, Y: TangentVector) -> float:
    """Kernel with ∫₀¹ Φ″(τ) h̃(τ, Y) dτ = 2 Σ_{α≠0} b_α |Y_α|²."""
    _check_tau(tau)
    weights = Y.weights_by_degree()
    return float(sum(2.0 * weights[K] * degree_kernel(params, K)(tau) for K in range(1, params.M + 1)))


def h_tilde_as_printed(params: Params, tau: float, Y: TangentVector) -> float:
    """The kernel with (1 − τ^{−1/M}) in place of s = τ^{−1/M} − 1.

    Reported for comparison with `h_tilde`; not expected to satisfy the
    integral identity.
    """
    _check_tau(tau)
    N, M = params.N, params.M
    weights = Y.weights_by_degree()
    s_printed = 1.0 - tau ** (-1.0 / M)
    prefactor = tau ** ((M + N) / M) / M
    return float(
        sum(
            2.0 * weights[K] * N * c_tilde_sq_by_degree(K, M, N) * prefactor * bracket(params, K, s_printed)
            for K in range(1, M + 1)
        )
    )


def h_tilde_integral(params: Params, phi: ConvexPhi, Y: TangentVector) -> tuple[float, float]:
    """∫₀¹ Φ″(τ) h̃(τ, Y) dτ by adaptive quadrature, with its error estimate."""
    weights = Y.weights_by_degree()

    def kernel(tau):
        return sum(2.0 * weights[K] * degree_kernel(params, K)(tau) for K in range(1, params.M + 1))

    return phi.integrate_curvature(kernel, power=params.M)


def b_alpha_direct(params: Params, phi: ConvexPhi, K: int) -> float:
    """b for degree K from the s-integral over (0, ∞) without substitution.

    Independent of `degree_kernel`; only valid for Φ″ given by density pieces.
    """
    _check_degree(params, K)
    if phi.atoms:
        raise ValueError("direct s-quadrature needs Φ″ without atoms")
    N, M = params.N, params.M
    scale = N * c_tilde_sq_by_degree(K, M, N)

    def integrand(s: float) -> float:
        tau = (1.0 + s) ** (-M)
        return float(phi.second_derivative(tau)) * scale * (1.0 + s) ** (-(2 * M + N + 1)) * float(
            bracket(params, K, s)
        )

    value, _ = quad(integrand, 0.0, math.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
    return value
