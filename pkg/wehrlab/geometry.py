"""Distance to the coherent-state manifold V and geodesics on the unit sphere S.

The Husimi supremum T is found by maximizing |F_h(v)|² over unit vectors
v ∈ C^{N+1}, so maximizers at infinity are covered. The distance then
follows from the closed forms D = √(2−2√T) and dist = 2·arcsin(D/2).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from wehrlab.combinatorics import Params
from wehrlab.logging_config import get_logger
from wehrlab.state_space import (
    PolynomialState,
    TangentVector,
    base_point,
    from_coefficients,
    monomials,
    real_inner,
)

logger = get_logger(__name__)

DEFAULT_STARTS = 32
GRADIENT_TOLERANCE = 1e-12
MAX_ITERATIONS = 1000
MAX_BACKTRACKS = 60
# Armijo parameters; the next trial step is the last accepted one times OPTIMISM.
CONTRACTION = 0.5
SUFFICIENT_INCREASE = 1e-4
OPTIMISM = 2.0
# Increases below this are rounding noise for objectives of order one.
ROUNDOFF = 4e-16
EPS = float(np.finfo(float).eps)
ROUNDING_FACTOR = 64.0
# Hessian eigenvalues below this fraction of the largest one are treated as zero.
NEWTON_FLOOR = 1e-8
MAX_NEWTON_LENGTH = 0.5
# Starts whose values differ by less than this count as ties (first one wins).
TIE_TOLERANCE = 1e-12
UNIT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class DistanceResult:
    T: float
    D_euclid: float
    dist_geodesic: float
    argmax_v: np.ndarray = field(repr=False)
    n_starts_used: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "D_euclid": self.D_euclid,
            "dist_geodesic": self.dist_geodesic,
            "argmax_v": [[float(c.real), float(c.imag)] for c in self.argmax_v],
            "n_starts_used": self.n_starts_used,
            "converged": self.converged,
        }


def chord_to_geodesic(D: float) -> float:
    """Arc length on S between two points at chordal distance D."""
    if not 0.0 <= D <= 2.0:
        raise ValueError(f"chordal distance must lie in [0, 2], got {D}")
    return 2.0 * math.asin(D / 2.0)


def geodesic_to_chord(g: float) -> float:
    if not 0.0 <= g <= math.pi:
        raise ValueError(f"geodesic distance must lie in [0, π], got {g}")
    return 2.0 * math.sin(g / 2.0)


def chord_from_sup(T: float) -> float:
    """D = √(2−2√T), the distance from a state with Husimi supremum T to V."""
    T = min(max(T, 0.0), 1.0)
    return math.sqrt(max(0.0, 2.0 - 2.0 * math.sqrt(T)))


class _HomogeneousObjective:
    """f(v) = |F_h(v)|² with its Riemannian gradient and Hessian on the unit sphere.

    Polynomials are summed row by row, so a row's value never depends on how
    many other rows share the batch.
    """

    def __init__(self, state: PolynomialState):
        params = state.params
        self.M = params.M
        self.exponents = params.homogeneous_exponents
        self.amplitudes = state.coeffs * params.coefficients
        n = params.N + 1
        self.first = [self._lower(self.exponents, self.amplitudes, i) for i in range(n)]
        self.second = {(i, j): self._lower(*self.first[i], j) for i in range(n) for j in range(i, n)}
        scale = float(np.sum(np.abs(self.amplitudes)))
        # Rounding in the gradient grows like M·scale²; below that floor it is noise.
        self.gradient_tolerance = max(GRADIENT_TOLERANCE, ROUNDING_FACTOR * EPS * self.M * scale**2)

    @staticmethod
    def _lower(exponents: np.ndarray, weights: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Exponents and weights of ∂/∂v_i of Σ weights·v^exponents."""
        lowered = exponents.copy()
        lowered[:, i] = np.maximum(lowered[:, i] - 1, 0)
        return lowered, weights * exponents[:, i]

    @staticmethod
    def _polynomial(V: np.ndarray, exponents: np.ndarray, weights: np.ndarray) -> np.ndarray:
        return np.sum(monomials(V, exponents) * weights, axis=1)

    def value(self, V: np.ndarray) -> np.ndarray:
        return np.abs(self._polynomial(V, self.exponents, self.amplitudes)) ** 2

    def jet(self, v: np.ndarray) -> tuple[complex, np.ndarray, np.ndarray]:
        """F, its complex gradient g and complex Hessian H at a single point v."""
        row = v[None, :]
        F = self._polynomial(row, self.exponents, self.amplitudes)[0]
        g = np.array([self._polynomial(row, e, w)[0] for e, w in self.first])
        H = np.empty((v.size, v.size), dtype=complex)
        for (i, j), (e, w) in self.second.items():
            H[i, j] = H[j, i] = self._polynomial(row, e, w)[0]
        return F, g, H


def _riemannian_gradient(v: np.ndarray, F: complex, g: np.ndarray) -> np.ndarray:
    euclidean = 2.0 * F * np.conj(g)
    return euclidean - real_inner(v, euclidean) * v


def _newton_direction(
    objective: _HomogeneousObjective, v: np.ndarray, F: complex, g: np.ndarray, H: np.ndarray, grad: np.ndarray
) -> np.ndarray | None:
    """Newton step on the directions orthogonal to v and iv, or None away from a local maximum.

    The Hessian of f on the sphere is formed in a real orthonormal basis of
    that space. Eigenvalues within NEWTON_FLOOR of zero (a continuum of
    maximizers) are left out of the inverse.
    """
    n = v.size
    x = np.concatenate([v.real, v.imag])
    jx = np.concatenate([-v.imag, v.real])
    Q, _ = np.linalg.qr(np.column_stack([x, jx, np.eye(2 * n)]))
    B = Q[:n, 2:] + 1j * Q[n:, 2:]

    radial = 2.0 * objective.M * abs(F) ** 2
    applied = 2.0 * np.conj(g)[:, None] * (g @ B)[None, :] + 2.0 * F * np.conj(H @ B) - radial * B
    hessian = np.real(np.conj(B).T @ applied)
    hessian = 0.5 * (hessian + hessian.T)
    gradient = np.real(np.conj(B).T @ grad)

    eigenvalues, U = np.linalg.eigh(hessian)
    floor = NEWTON_FLOOR * max(float(np.max(np.abs(eigenvalues))), EPS)
    if eigenvalues[-1] > floor:
        return None
    keep = eigenvalues < -floor
    if not np.any(keep):
        return None
    U = U[:, keep]
    xi = B @ (U @ ((U.T @ gradient) / -eigenvalues[keep]))
    length = float(np.linalg.norm(xi))
    if length > MAX_NEWTON_LENGTH:
        xi *= MAX_NEWTON_LENGTH / length
    return xi


def _retract(v: np.ndarray, xi: np.ndarray) -> np.ndarray:
    moved = v + xi
    return moved / np.linalg.norm(moved)


def _ascend(objective: _HomogeneousObjective, v: np.ndarray, max_iter: int) -> tuple[np.ndarray, float, bool]:
    """Ascent from one start: Newton steps near a maximum, Armijo gradient steps elsewhere."""
    step = 1.0
    for _ in range(max_iter):
        F, g, H = objective.jet(v)
        f = abs(F) ** 2
        grad = _riemannian_gradient(v, F, g)
        grad_sq = real_inner(grad, grad)
        if math.sqrt(grad_sq) <= objective.gradient_tolerance:
            return v, f, True
        slack = ROUNDOFF * max(f, 1.0)

        xi = _newton_direction(objective, v, F, g, H, grad)
        if xi is not None:
            trial = _retract(v, xi)
            if objective.value(trial[None, :])[0] - f >= -slack:
                v = trial
                continue

        trial_step = OPTIMISM * step
        for _ in range(MAX_BACKTRACKS):
            trial = _retract(v, trial_step * grad)
            if objective.value(trial[None, :])[0] - f >= SUFFICIENT_INCREASE * trial_step * grad_sq - slack:
                v, step = trial, trial_step
                break
            trial_step *= CONTRACTION
        else:
            return v, f, False
    F, g, _ = objective.jet(v)
    grad = _riemannian_gradient(v, F, g)
    return v, abs(F) ** 2, bool(np.linalg.norm(grad) <= objective.gradient_tolerance)


def _starting_points(state: PolynomialState, n_starts: int, seed: int) -> np.ndarray:
    """Uniform random unit vectors followed by the largest-coefficient coherent direction."""
    params = state.params
    rng = np.random.default_rng(seed)
    n = params.N + 1
    uniform = rng.standard_normal((n_starts, n)) + 1j * rng.standard_normal((n_starts, n))
    uniform /= np.linalg.norm(uniform, axis=1, keepdims=True)
    largest = int(np.argmax(np.abs(state.coeffs)))
    guided = np.sqrt(params.homogeneous_exponents[largest] / params.M).astype(complex)
    return np.vstack([uniform, guided[None, :]])


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v) > 1e-12))
    return v * np.exp(-1j * np.angle(v[pivot]))


def husimi_sup(
    state: PolynomialState,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    threads: int = 1,
    max_iter: int = MAX_ITERATIONS,
) -> DistanceResult:
    """T = sup |F(z)|²/(1+|z|²)^M by multistart ascent on the unit sphere of C^{N+1}.

    Deterministic given seed; the result does not depend on `threads`.

    Raises:
        ValueError: If n_starts < 1.
    """
    if n_starts < 1:
        raise ValueError(f"n_starts must be at least 1, got {n_starts}")
    objective = _HomogeneousObjective(state)
    starts = _starting_points(state, n_starts, seed)

    # Each start is its own work unit, so results do not depend on `threads`.
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, starts.shape[0])) as executor:
            results = list(executor.map(lambda v0: _ascend(objective, v0, max_iter), starts))
    else:
        results = [_ascend(objective, v0, max_iter) for v0 in starts]
    V = np.vstack([r[0] for r in results])
    values = np.array([r[1] for r in results])
    converged = np.array([r[2] for r in results])

    best = int(np.flatnonzero(values >= values.max() - TIE_TOLERANCE)[0])
    if not converged[best]:
        logger.warning(
            "husimi_sup: best start did not reach gradient tolerance after %d iterations (T=%.15g)",
            max_iter,
            values[best],
        )
    T = float(min(values[best], 1.0))
    D = chord_from_sup(T)
    return DistanceResult(
        T=T,
        D_euclid=D,
        dist_geodesic=chord_to_geodesic(D),
        argmax_v=_normalize_phase(V[best]),
        n_starts_used=int(starts.shape[0]),
        converged=bool(converged[best]),
    )


def distance_to_V(
    state: PolynomialState, n_starts: int = DEFAULT_STARTS, seed: int = 0, threads: int = 1
) -> DistanceResult:
    """Chordal and geodesic distance from the state to the coherent manifold."""
    result = husimi_sup(state, n_starts, seed, threads)
    logger.debug("distance_to_V: T=%.15g dist=%.15g", result.T, result.dist_geodesic)
    return result


def geodesic(start: PolynomialState, direction: ArrayLike, t: float) -> PolynomialState:
    """X(t) = cos(t)·X + sin(t)·Y for a unit Y with Re⟨X, Y⟩ = 0.

    Raises:
        ValueError: If Y is not a unit vector orthogonal to X.
    """
    Y = np.asarray(direction, dtype=complex).reshape(-1)
    if Y.shape != start.coeffs.shape:
        raise ValueError(f"direction has {Y.size} components, expected {start.coeffs.size}")
    if abs(np.linalg.norm(Y) - 1.0) > UNIT_TOLERANCE:
        raise ValueError(f"geodesic direction must be a unit vector, got norm {np.linalg.norm(Y):.12g}")
    if abs(real_inner(start.coeffs, Y)) > UNIT_TOLERANCE:
        raise ValueError("geodesic direction must be orthogonal to the starting point")
    return from_coefficients(start.params, math.cos(t) * start.coeffs + math.sin(t) * Y)


def geodesic_from_X0(Y: TangentVector, t: float) -> PolynomialState:
    """Unit-speed great circle through X₀ = (1, 0, …, 0) with initial velocity Y."""
    return geodesic(base_point(Y.params), Y.components, t)


def grid_sup(state: PolynomialState, n_points: int = 10_000, seed: int = 0) -> float:
    """Maximum of the homogeneous Husimi function over a fixed random grid (lower bound for T)."""
    params: Params = state.params
    rng = np.random.default_rng(seed)
    n = params.N + 1
    V = rng.standard_normal((n_points, n)) + 1j * rng.standard_normal((n_points, n))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return float(_HomogeneousObjective(state).value(V).max())
