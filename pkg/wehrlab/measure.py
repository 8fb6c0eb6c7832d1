"""The probability measure ν on C^N and the entropy functional G.

ν has density c_N (1+|z|²)^{−N−1}, c_N = N!/π^N. Under ν the variable
t = |z|²/(1+|z|²) is Beta(N, 1) distributed and z/|z| is uniform on the unit
sphere, which gives exact sampling without rejection. In homogeneous form a
sample is v = (√(1−t), √t·ω) and the Husimi function is evaluated there.

Quadrature schemes (CLI spec strings):

    mc:<n>:<seed>                 Monte Carlo, n samples
    tensor:<radial>[:<angular>]   Gauss–Legendre in t × trapezoid in angle, N = 1 only
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from wehrlab.combinatorics import Params
from wehrlab.logging_config import get_logger
from wehrlab.phi import ConvexPhi
from wehrlab.state_space import PolynomialState, husimi_homogeneous

logger = get_logger(__name__)

# Monte Carlo samples are generated and reduced in blocks of this size, each
# with its own child seed, so results do not depend on the thread count.
BLOCK_SIZE = 1 << 14
# Sample count used when a tensor scheme meets a kinked Φ.
TENSOR_FALLBACK_SAMPLES = 1_000_000
DEFAULT_RADIAL_ORDER = 64


class Estimate(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class MonteCarloScheme:
    n_samples: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be at least 1, got {self.n_samples}")

    @property
    def spec(self) -> str:
        return f"mc:{self.n_samples}:{self.seed}"

    error_policy = "standard error of the sample mean"


@dataclass(frozen=True)
class TensorScheme:
    radial_order: int = DEFAULT_RADIAL_ORDER
    angular_order: int | None = None

    def __post_init__(self) -> None:
        if self.radial_order < 1 or (self.angular_order is not None and self.angular_order < 1):
            raise ValueError("tensor orders must be positive")

    def angular_nodes(self, params: Params) -> int:
        return self.angular_order if self.angular_order is not None else 4 * params.M + 1

    @property
    def spec(self) -> str:
        if self.angular_order is None:
            return f"tensor:{self.radial_order}"
        return f"tensor:{self.radial_order}:{self.angular_order}"

    error_policy = "difference to the rule with doubled orders"


QuadratureScheme = MonteCarloScheme | TensorScheme


def parse_scheme(spec: str) -> QuadratureScheme:
    """Parse `mc:<n>:<seed>` or `tensor:<radial>[:<angular>]`.

    Raises:
        ValueError: If the string is not a valid scheme.
    """
    name, *fields = spec.strip().split(":")
    try:
        if name == "mc" and len(fields) in (1, 2):
            seed = int(fields[1]) if len(fields) == 2 else 0
            return MonteCarloScheme(int(float(fields[0])), seed)
        if name == "tensor" and len(fields) in (0, 1, 2):
            radial = int(fields[0]) if fields else DEFAULT_RADIAL_ORDER
            angular = int(fields[1]) if len(fields) == 2 else None
            return TensorScheme(radial, angular)
    except ValueError as e:
        raise ValueError(f"Invalid scheme {spec!r}: {e}") from None
    raise ValueError(f"Unknown scheme {spec!r}; expected mc:<n>:<seed> or tensor:<radial>:<angular>")


def check_compatible(params: Params, scheme: QuadratureScheme) -> None:
    if isinstance(scheme, TensorScheme) and params.N != 1:
        raise ValueError(f"tensor quadrature is only available for N = 1, got N = {params.N}")


def _block_sizes(n: int) -> list[int]:
    full, rest = divmod(n, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _sample_block(params: Params, seed_seq: np.random.SeedSequence, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Radial variable t ~ Beta(N, 1) and directions ω uniform on S^{2N−1}."""
    rng = np.random.default_rng(seed_seq)
    t = rng.random(size) ** (1.0 / params.N)
    omega = rng.standard_normal((size, params.N)) + 1j * rng.standard_normal((size, params.N))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    return t, omega


def _homogeneous_nodes(t: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return np.column_stack([np.sqrt(1.0 - t), np.sqrt(t)[:, None] * omega])


def _map_blocks(fn, sizes: Sequence[int], seed: int, threads: int) -> list:
    """Apply fn(seed_seq, size) to every block, results in block order."""
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    if threads <= 1 or len(sizes) == 1:
        return [fn(child, size) for child, size in zip(children, sizes)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [executor.submit(fn, child, size) for child, size in zip(children, sizes)]
        return [future.result() for future in futures]


def sample_nu(params: Params, seed: int, n: int, threads: int = 1) -> np.ndarray:
    """n i.i.d. points z ∈ C^N drawn from ν, deterministic given seed.

    Returns:
        (n, N) complex array.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")

    def block(seed_seq, size):
        t, omega = _sample_block(params, seed_seq, size)
        return np.sqrt(t / (1.0 - t))[:, None] * omega

    return np.concatenate(_map_blocks(block, _block_sizes(n), seed, threads))


def mu0(params: Params, t: float) -> float:
    """ν({u₀ > t}) = (1 − t^{1/M})^N for the coherent Husimi function u₀ = (1+|z|²)^{−M}."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return (1.0 - t ** (1.0 / params.M)) ** params.N


def _combined_values(
    states: Sequence[PolynomialState], weights: Sequence[float], phi: ConvexPhi, nodes: np.ndarray
) -> np.ndarray:
    total = np.zeros(nodes.shape[0])
    for state, weight in zip(states, weights):
        total += weight * np.asarray(phi.value(np.clip(husimi_homogeneous(state, nodes), 0.0, 1.0)))
    return total


def _monte_carlo(states, weights, phi, scheme: MonteCarloScheme, threads: int) -> Estimate:
    params = states[0].params

    def block(seed_seq, size):
        values = _combined_values(states, weights, phi, _homogeneous_nodes(*_sample_block(params, seed_seq, size)))
        mean = float(values.mean())
        return size, mean, float(np.sum((values - mean) ** 2))

    # Chan et al. pairwise update, in fixed block order.
    count, mean, m2 = 0, 0.0, 0.0
    for size, block_mean, block_m2 in _map_blocks(block, _block_sizes(scheme.n_samples), scheme.seed, threads):
        delta = block_mean - mean
        total = count + size
        mean += delta * size / total
        m2 += block_m2 + delta * delta * count * size / total
        count = total
    variance = m2 / (count - 1) if count > 1 else 0.0
    return Estimate(mean, math.sqrt(variance / count))


def _tensor_rule(states, weights, phi, radial: int, angular: int) -> float:
    x, w = np.polynomial.legendre.leggauss(radial)
    t = 0.5 * (x + 1.0)
    theta = 2.0 * np.pi * np.arange(angular) / angular
    tt, th = np.meshgrid(t, theta, indexing="ij")
    omega = np.exp(1j * th.reshape(-1))[:, None]
    nodes = _homogeneous_nodes(tt.reshape(-1), omega)
    values = _combined_values(states, weights, phi, nodes).reshape(radial, angular)
    return float(0.5 * w @ values.mean(axis=1))


def integrate_combination(
    states: Sequence[PolynomialState],
    weights: Sequence[float],
    phi: ConvexPhi,
    scheme: QuadratureScheme,
    threads: int = 1,
) -> Estimate:
    """Estimate Σ_k weights_k · G(states_k) on common nodes.

    Sharing the nodes makes differences of nearby states far more accurate
    than separate estimates (common random numbers for Monte Carlo).
    """
    if not states or len(states) != len(weights):
        raise ValueError("need one weight per state")
    params = states[0].params
    if any(state.params != params for state in states):
        raise ValueError("all states must share (N, M)")
    check_compatible(params, scheme)
    if isinstance(scheme, TensorScheme):
        if phi.atoms:
            fallback = MonteCarloScheme(TENSOR_FALLBACK_SAMPLES, 0)
            logger.warning("Φ=%s has kinks; tensor quadrature replaced by %s", phi.spec, fallback.spec)
            return _monte_carlo(states, weights, phi, fallback, threads)
        angular = scheme.angular_nodes(params)
        coarse = _tensor_rule(states, weights, phi, scheme.radial_order, angular)
        fine = _tensor_rule(states, weights, phi, 2 * scheme.radial_order, 2 * angular)
        return Estimate(fine, abs(fine - coarse))
    return _monte_carlo(states, weights, phi, scheme, threads)


def entropy_G(state: PolynomialState, phi: ConvexPhi, scheme: QuadratureScheme, threads: int = 1) -> Estimate:
    """G(X) = ∫ Φ(u_X) dν with an error estimate."""
    return integrate_combination([state], [1.0], phi, scheme, threads)


def sup_G(params: Params, phi: ConvexPhi) -> float:
    """sup G = ∫ Φ((1+|z|²)^{−M}) dν as a one-dimensional integral.

    With x = (1+|z|²)^{−1} the integral is ∫₀¹ Φ(x^M) N (1−x)^{N−1} dx, which
    has a bounded integrand. Kinks of Φ and ends of its density pieces are
    passed to the integrator as breakpoints.
    """
    N, M = params.N, params.M
    ends = {*phi.kinks, *(p.lo for p in phi.pieces), *(p.hi for p in phi.pieces)}
    breakpoints = sorted(k ** (1.0 / M) for k in ends if 0.0 < k < 1.0)

    def integrand(x: float) -> float:
        return float(phi.value(x**M)) * N * (1.0 - x) ** (N - 1)

    value, error = quad(integrand, 0.0, 1.0, points=breakpoints or None, epsabs=1e-12, epsrel=1e-12, limit=200)
    if error > 1e-10:
        logger.warning("sup_G quadrature error %.2e above target for Φ=%s", error, phi.spec)
    return value
