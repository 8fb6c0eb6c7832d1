"""Normalized polynomials of P_M as coefficient vectors on the unit sphere of C^d.

A state X = (X_α) represents F(z) = Σ X_α e_α(z) with e_α = c_α z^α. Points of
C^N are also handled in homogeneous form v = (1, z)/√(1+|z|²) ∈ C^{N+1}, where
the Husimi function becomes |F_h(v)|² for the homogenization
F_h(v) = Σ X_α c_α v₀^{M−|α|} v₁^{α₁}···v_N^{α_N}; this keeps the points at
infinity and avoids overflow for large |z|.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from wehrlab.combinatorics import Params
from wehrlab.logging_config import get_logger

logger = get_logger(__name__)

NORM_TOLERANCE = 1e-12
# State files whose stored norm is further than this from 1 are reported.
FILE_NORM_WARNING = 1e-6
NORMAL_NORM_FLOOR = 1e-8


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class PolynomialState:
    """Unit coefficient vector X ∈ S^{2d−1} in graded-lex index order."""

    params: Params
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        if coeffs.shape != (self.params.d,):
            raise ValueError(f"expected {self.params.d} coefficients, got {coeffs.size}")
        if abs(np.linalg.norm(coeffs) - 1.0) > NORM_TOLERANCE:
            raise ValueError("state coefficients must have unit norm; use from_coefficients")
        object.__setattr__(self, "coeffs", _readonly(coeffs))

    def __getitem__(self, alpha: tuple[int, ...]) -> complex:
        return complex(self.coeffs[self.params.position[alpha]])


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Element Y of T_{X₀}S at X₀ = (1, 0, …, 0), i.e. with Re Y₀ = 0."""

    params: Params
    components: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        components = np.array(self.components, dtype=complex).reshape(-1)
        if components.shape != (self.params.d,):
            raise ValueError(f"expected {self.params.d} components, got {components.size}")
        if abs(components[0].real) > NORM_TOLERANCE:
            raise ValueError(f"not tangent at X0: Re Y0 = {components[0].real:.3e}")
        object.__setattr__(self, "components", _readonly(components))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    @property
    def is_normal(self) -> bool:
        """True when Y lies in the normal space of the coherent manifold at X₀."""
        return bool(np.all(np.abs(self.components[self.params.degrees <= 1]) <= NORM_TOLERANCE))

    def weights_by_degree(self) -> dict[int, float]:
        """Σ_{|α|=K} |Y_α|² for every degree K."""
        sq = np.abs(self.components) ** 2
        return {K: float(sq[self.params.degrees == K].sum()) for K in range(self.params.M + 1)}


def from_coefficients(params: Params, raw: ArrayLike) -> PolynomialState:
    """Normalize a raw coefficient vector into a state.

    Raises:
        ValueError: On a length mismatch or the zero vector.
    """
    coeffs = np.asarray(raw, dtype=complex).reshape(-1)
    if coeffs.size != params.d:
        raise ValueError(f"expected {params.d} coefficients for N={params.N}, M={params.M}, got {coeffs.size}")
    norm = np.linalg.norm(coeffs)
    if not norm > 0 or not math.isfinite(norm):
        raise ValueError("cannot normalize a zero or non-finite coefficient vector")
    return PolynomialState(params, coeffs / norm)


def base_point(params: Params) -> PolynomialState:
    """X₀ = (1, 0, …, 0), the constant polynomial, coherent at w = 0."""
    coeffs = np.zeros(params.d, dtype=complex)
    coeffs[0] = 1.0
    return PolynomialState(params, coeffs)


def basis_state(params: Params, alpha: tuple[int, ...]) -> PolynomialState:
    coeffs = np.zeros(params.d, dtype=complex)
    coeffs[params.position[tuple(alpha)]] = 1.0
    return PolynomialState(params, coeffs)


def homogenize(z: ArrayLike) -> np.ndarray:
    """(1, z)/√(1+|z|²) for a point or rows of points."""
    z = np.asarray(z, dtype=complex)
    ones = np.ones(z.shape[:-1] + (1,), dtype=complex)
    v = np.concatenate([ones, z], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def monomials(points: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Matrix of p^E for rows p of `points` (n, K) and rows E of `exponents` (d, K)."""
    points = np.atleast_2d(points)
    top = int(exponents.max()) if exponents.size else 0
    powers = np.arange(top + 1)
    result = np.ones((points.shape[0], exponents.shape[0]), dtype=complex)
    for k in range(exponents.shape[1]):
        table = points[:, k, None] ** powers
        result *= table[:, exponents[:, k]]
    return result


def coherent_state(params: Params, w: ArrayLike) -> PolynomialState:
    """Normalized reproducing kernel k_w: X_α = c_α w̄^α / (1+|w|²)^{M/2}."""
    w = np.asarray(w, dtype=complex).reshape(params.N)
    return coherent_from_direction(params, homogenize(w))


def coherent_from_direction(params: Params, v: ArrayLike) -> PolynomialState:
    """Coherent state peaked at the homogeneous direction v ∈ C^{N+1}.

    X_α = c_α v̄^{(M−|α|, α)}; its homogenized polynomial is ⟨v, ·⟩^M, so
    v = (0, …, 0, 1) gives the monomial z_N^M (a coherent state at infinity).
    """
    v = np.asarray(v, dtype=complex).reshape(params.N + 1)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise ValueError("direction must be nonzero")
    v = v / norm
    coeffs = params.coefficients * monomials(np.conj(v)[None, :], params.homogeneous_exponents)[0]
    return from_coefficients(params, coeffs)


def evaluate(state: PolynomialState, z: ArrayLike):
    """F(z) = Σ X_α c_α z^α for a point (shape (N,)) or rows of points."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    values = monomials(np.atleast_2d(z), state.params.exponents) @ (
        state.coeffs * state.params.coefficients
    )
    return complex(values[0]) if single else values


def husimi_homogeneous(state: PolynomialState, v: ArrayLike):
    """|F_h(v)|² for a unit vector (or rows of unit vectors) v ∈ C^{N+1}."""
    v = np.asarray(v, dtype=complex)
    single = v.ndim == 1
    amplitude = monomials(np.atleast_2d(v), state.params.homogeneous_exponents) @ (
        state.coeffs * state.params.coefficients
    )
    values = np.abs(amplitude) ** 2
    return float(values[0]) if single else values


def husimi(state: PolynomialState, z: ArrayLike):
    """u(z) = |F(z)|² / (1+|z|²)^M, a number in [0, 1]."""
    return husimi_homogeneous(state, homogenize(z))


def random_state(params: Params, seed: int | np.random.Generator) -> PolynomialState:
    """Uniform point of S^{2d−1}: d standard complex Gaussians, normalized."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(params.d) + 1j * rng.standard_normal(params.d)
    return from_coefficients(params, raw)


def split_at_X0(Y: TangentVector) -> tuple[TangentVector, TangentVector]:
    """Split Y into its parts tangent (|α| ≤ 1) and normal (|α| ≥ 2) to the coherent manifold at X₀."""
    low = Y.params.degrees <= 1
    tangent = np.where(low, Y.components, 0.0)
    normal = np.where(low, 0.0, Y.components)
    return TangentVector(Y.params, tangent), TangentVector(Y.params, normal)


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Re⟨a, b⟩, the Euclidean inner product of C^d seen as R^{2d}."""
    return float(np.real(np.vdot(a, b)))


def _as_real(vectors: np.ndarray) -> np.ndarray:
    return np.concatenate([vectors.real, vectors.imag], axis=0)


def _as_complex(vectors: np.ndarray, d: int) -> np.ndarray:
    return vectors[:d] + 1j * vectors[d:]


def tangent_frame_V(params: Params, v: ArrayLike) -> np.ndarray:
    """Orthonormal real basis of the tangent space of the coherent manifold.

    The base point is coherent_from_direction(params, v). Columns of the
    returned (d, 2N+1) complex array are orthonormal for Re⟨·,·⟩. Obtained by
    differentiating the coherent map along the 2(N+1) real directions of v
    and discarding the radial one.
    """
    v = np.asarray(v, dtype=complex).reshape(params.N + 1)
    v = v / np.linalg.norm(v)
    X = coherent_from_direction(params, v).coeffs
    E = params.homogeneous_exponents
    conj_v = np.conj(v)
    columns = []
    for i in range(params.N + 1):
        lowered = E.copy()
        lowered[:, i] = np.maximum(lowered[:, i] - 1, 0)
        partial = params.coefficients * E[:, i] * monomials(conj_v[None, :], lowered)[0]
        for direction in (1.0, 1j):
            dX = partial * np.conj(direction)
            dX = dX - real_inner(X, dX) * X
            columns.append(dX)
    U, sigma, _ = np.linalg.svd(_as_real(np.array(columns).T), full_matrices=False)
    rank = int(np.sum(sigma > 1e-10 * sigma.max()))
    return _as_complex(U[:, :rank], params.d)


def random_normal_direction(
    params: Params, v: ArrayLike, rng: np.random.Generator
) -> np.ndarray:
    """Unit vector normal to the coherent manifold at coherent_from_direction(v).

    Raises:
        ValueError: If M < 2, where the coherent manifold fills the sphere
            and there is no normal direction.
    """
    if params.M < 2:
        raise ValueError(f"no normal directions to the coherent manifold for M={params.M} < 2")
    X = coherent_from_direction(params, v).coeffs
    frame = tangent_frame_V(params, v)
    Y = rng.standard_normal(params.d) + 1j * rng.standard_normal(params.d)
    Y = Y - real_inner(X, Y) * X
    for k in range(frame.shape[1]):
        Y = Y - real_inner(frame[:, k], Y) * frame[:, k]
    norm = float(np.linalg.norm(Y))
    if not norm > NORMAL_NORM_FLOOR:
        raise ValueError("random normal direction degenerated; the normal space looks trivial")
    return Y / norm


def state_to_dict(state: PolynomialState) -> dict:
    return {
        "N": state.params.N,
        "M": state.params.M,
        "coeffs": [[float(c.real), float(c.imag)] for c in state.coeffs],
    }


def write_state(state: PolynomialState, path: str | Path) -> None:
    """Write a state file: {"N":..,"M":..,"coeffs":[[re,im],...]} in graded-lex order."""
    Path(path).write_text(json.dumps(state_to_dict(state), indent=2) + "\n")


def read_state(path: str | Path) -> PolynomialState:
    """Read and normalize a state file, warning when the stored norm is off.

    Raises:
        OSError: If the file cannot be read.
        ValueError: If the content is malformed.
    """
    data = json.loads(Path(path).read_text())
    try:
        params = Params(int(data["N"]), int(data["M"]))
        raw = np.array([complex(re, im) for re, im in data["coeffs"]])
    except (KeyError, TypeError) as e:
        raise ValueError(f"malformed state file {path}: {e}") from None
    norm = float(np.linalg.norm(raw))
    if abs(norm - 1.0) > FILE_NORM_WARNING:
        logger.warning("state in %s has norm %.9f; normalizing", path, norm)
    return from_coefficients(params, raw)
