"""Multi-index bookkeeping and the closed-form constants of the polynomial picture.

Coefficient vectors are indexed by multi-indices α ∈ ℕ^N with |α| ≤ M in
graded-lexicographic order: by degree first, and within a degree with the
first component largest first, so position 0 is always the zero index.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterator

import numpy as np
from scipy.special import gammaln

MultiIndex = tuple[int, ...]

# Binomials with n up to this bound are computed exactly in integers.
EXACT_BINOMIAL_LIMIT = 60


def binomial(n: int, k: int) -> int | float:
    """C(n, k), exact for n ≤ 60 and via log-gamma beyond."""
    if k < 0 or k > n:
        return 0
    if n <= EXACT_BINOMIAL_LIMIT:
        return math.comb(n, k)
    return float(np.exp(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)))


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """Yield all ways to write `total` as `parts` nonnegative integers, first component largest first."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


def enumerate_multi_indices(N: int, M: int) -> list[MultiIndex]:
    """All α ∈ ℕ^N with |α| ≤ M in graded-lex order.

    Raises:
        ValueError: If N < 1 or M < 0.
    """
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if M < 0:
        raise ValueError(f"M must be nonnegative, got {M}")
    return [alpha for degree in range(M + 1) for alpha in _compositions(degree, N)]


def _check_degree(alpha: MultiIndex, M: int) -> int:
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index {alpha} has negative components")
    length = sum(alpha)
    if length > M:
        raise ValueError(f"|α| = {length} exceeds M = {M}")
    return length


def multinomial(alpha: MultiIndex, M: int) -> int | float:
    """M! / (α! (M−|α|)!), built as a product of binomials."""
    remaining = M
    result: int | float = 1
    for a in alpha:
        result *= binomial(remaining, a)
        remaining -= a
    return result


def c_alpha(alpha: MultiIndex, M: int) -> float:
    """Normalization of the basis monomial e_α = c_α z^α, c_α = √(M choose α)."""
    _check_degree(alpha, M)
    return math.sqrt(multinomial(alpha, M))


def A_const(M: int, N: int, K: int) -> int | float:
    """A_{M,N,K} = (M−K+1)·C(M+N, K+N−1); A_{M,N,0} = d·N."""
    if K < 0 or K > M:
        raise ValueError(f"K must satisfy 0 ≤ K ≤ M, got K={K}, M={M}")
    return (M - K + 1) * binomial(M + N, K + N - 1)


def c_tilde_sq_by_degree(K: int, M: int, N: int) -> float:
    """(N−1)! M! / ((N+K−1)! (M−K)!) for a multi-index of length K."""
    if K < 0 or K > M:
        raise ValueError(f"|α| = {K} exceeds M = {M}")
    if M + N <= EXACT_BINOMIAL_LIMIT:
        value = Fraction(
            math.factorial(N - 1) * math.factorial(M),
            math.factorial(N + K - 1) * math.factorial(M - K),
        )
        return float(value)
    return float(
        np.exp(gammaln(N) + gammaln(M + 1) - gammaln(N + K) - gammaln(M - K + 1))
    )


def c_tilde_sq(alpha: MultiIndex, M: int, N: int) -> float:
    """c̃_α² = c_α² · (mean of |ω^α|² over the unit sphere of C^N).

    Depends on α only through |α|; equals A_{M,N,|α|} / A_{M,N,0}.
    """
    return c_tilde_sq_by_degree(_check_degree(alpha, M), M, N)


def incomplete_beta_primitive(M: int, N: int, K: int, s: float) -> float:
    """∫₀^s σ^{K+N−1} / (1+σ)^{M+N+1} dσ in closed form.

    Evaluates (1+s)^{−(M+N)} / A_{M,N,K} · Σ_{j=K+N}^{M+N} C(M+N, j) s^j,
    written in terms of s/(1+s) and 1/(1+s) so large s does not overflow.
    s = +inf returns the limit 1/A_{M,N,K} = B(K+N, M−K+1).

    Raises:
        ValueError: If s < 0 or K is out of range.
    """
    A = A_const(M, N, K)
    if s < 0 or math.isnan(s):
        raise ValueError(f"s must be nonnegative, got {s}")
    if math.isinf(s):
        return 1.0 / A
    x = s / (1.0 + s)
    y = 1.0 / (1.0 + s)
    total = math.fsum(
        binomial(M + N, j) * x**j * y ** (M + N - j) for j in range(K + N, M + N + 1)
    )
    return total / A


@dataclass(frozen=True)
class Params:
    """The pair (N, M) with the derived dimension and index order.

    N is the complex dimension of the base space and M the maximal degree;
    d = C(M+N, N) is the dimension of the polynomial space.
    """

    N: int
    M: int

    def __post_init__(self) -> None:
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not isinstance(self.M, int) or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")

    @cached_property
    def d(self) -> int:
        return int(binomial(self.M + self.N, self.N))

    @cached_property
    def index_order(self) -> tuple[MultiIndex, ...]:
        return tuple(enumerate_multi_indices(self.N, self.M))

    @cached_property
    def position(self) -> dict[MultiIndex, int]:
        return {alpha: k for k, alpha in enumerate(self.index_order)}

    @cached_property
    def exponents(self) -> np.ndarray:
        """(d, N) integer array of the multi-indices."""
        return np.array(self.index_order, dtype=np.int64).reshape(self.d, self.N)

    @cached_property
    def homogeneous_exponents(self) -> np.ndarray:
        """(d, N+1) array (M−|α|, α₁, …, α_N) used by the homogenized polynomial."""
        return np.column_stack([self.M - self.degrees, self.exponents])

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """c_α for every index, in index order."""
        return np.array([c_alpha(alpha, self.M) for alpha in self.index_order])

    def A_table(self) -> dict[int, int | float]:
        return {K: A_const(self.M, self.N, K) for K in range(self.M + 1)}

    def c_tilde_sq_table(self) -> dict[int, float]:
        return {K: c_tilde_sq_by_degree(K, self.M, self.N) for K in range(self.M + 1)}
