"""Convex weight functions Φ on [0, 1].

A `ConvexPhi` carries Φ, its one-sided derivatives and a description of the
measure Φ″ as absolutely continuous pieces plus atoms. Integrals against Φ″
(coefficients of the second differential, kernel identities) are computed
from that description, so kinked functions such as hinges are handled exactly.

Spec strings understood by `parse_phi`:

    pow:<p>                 t^p, p > 1
    xlogx                   t log t
    hinge:<T>               max(0, t − T), 0 < T < 1
    affine:<slope>,<c>      slope·t + c
    affcont:<a>,<b>,<inner> affine continuation of inner outside [a, b]
    quadcont:<a>,<inner>    quadratic continuation of inner below a
    mollify:<eta>,<inner>   inner convolved with a smooth bump of width eta
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import xlogy

from wehrlab.logging_config import get_logger

logger = get_logger(__name__)

ScalarFn = Callable[[ArrayLike], np.ndarray]

# Minimal number of nodes on which a mollified Φ″ is tabulated.
MOLLIFIER_GRID_POINTS = 1001
# Nodes per bump width when η is small compared with [a, b].
MOLLIFIER_NODES_PER_WIDTH = 50

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200
# Gauss–Legendre nodes per knot interval of a tabulated density.
KNOT_RULE_NODES = 10


def _out(x: np.ndarray):
    """Unwrap 0-d arrays so scalar inputs give scalar outputs."""
    return x[()] if x.ndim == 0 else x


def _as_float_array(t: ArrayLike) -> np.ndarray:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Atom:
    """Point mass of Φ″ (a jump of Φ′)."""

    location: float
    mass: float


@dataclass(frozen=True)
class DensityPiece:
    """Absolutely continuous part of Φ″ on the open interval (lo, hi).

    A tabulated density lists its interpolation nodes as `knots`; it is
    polynomial between them and is integrated node interval by node interval.
    """

    lo: float
    hi: float
    density: ScalarFn
    knots: tuple[float, ...] = field(default=(), repr=False)

    def clipped(self, lo: float, hi: float) -> "DensityPiece | None":
        new_lo, new_hi = max(self.lo, lo), min(self.hi, hi)
        if new_lo >= new_hi:
            return None
        knots = ()
        if self.knots:
            knots = (new_lo, *(k for k in self.knots if new_lo < k < new_hi), new_hi)
        return DensityPiece(new_lo, new_hi, self.density, knots)


@dataclass(frozen=True)
class ConvexPhi:
    """A convex function on [0, 1] together with its second-derivative measure.

    Attributes:
        spec: Identifier, the spec string the function was built from.
        value, d_left, d_right: Vectorised callables for Φ, Φ′₋ and Φ′₊.
        pieces: Density parts of Φ″.
        atoms: Point masses of Φ″.
        strict_interval: Interval on which Φ is declared strictly convex.
    """

    spec: str
    value: ScalarFn = field(repr=False)
    d_left: ScalarFn = field(repr=False)
    d_right: ScalarFn = field(repr=False)
    pieces: tuple[DensityPiece, ...] = field(default=(), repr=False)
    atoms: tuple[Atom, ...] = ()
    strict_interval: tuple[float, float] | None = None

    def __call__(self, t: ArrayLike):
        return self.value(t)

    @property
    def kinks(self) -> tuple[float, ...]:
        return tuple(sorted(atom.location for atom in self.atoms))

    @property
    def is_affine(self) -> bool:
        return not self.pieces and not self.atoms

    def second_derivative(self, t: ArrayLike):
        """Density of the absolutely continuous part of Φ″ (atoms excluded)."""
        t = _as_float_array(t)
        total = np.zeros_like(t)
        for piece in self.pieces:
            inside = (t > piece.lo) & (t < piece.hi)
            if np.any(inside):
                safe = np.where(inside, t, 0.5 * (piece.lo + piece.hi))
                total = total + np.where(inside, piece.density(safe), 0.0)
        return _out(total)

    def curvature_support(self) -> tuple[float, float] | None:
        """Smallest closed interval carrying the measure Φ″, or None if Φ is affine."""
        ends = [atom.location for atom in self.atoms]
        for piece in self.pieces:
            ends.extend((piece.lo, piece.hi))
        if not ends:
            return None
        return min(ends), max(ends)

    def curvature_mass(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Mass of Φ″ on [lo, hi] from the pieces and atoms, by adaptive quadrature."""
        value, _ = self.integrate_curvature(lambda tau: np.ones_like(tau), lo=lo, hi=hi)
        return value

    def total_mass(self) -> float:
        return self.curvature_mass(0.0, 1.0)

    def integrate_curvature(
        self,
        kernel: ScalarFn,
        power: int = 1,
        lo: float = 0.0,
        hi: float = 1.0,
    ) -> tuple[float, float]:
        """∫_{[lo,hi]} kernel(τ) dΦ″(τ) with an error estimate.

        Density pieces are integrated after the substitution τ = x^power,
        which removes the algebraic endpoint singularities of the kernels used
        for the second differential. Atoms contribute mass·kernel(location).
        Tabulated pieces use a fixed Gauss–Legendre rule on each node interval,
        which is exact up to rounding for the mass.
        """
        total = 0.0
        error = 0.0
        for piece in self.pieces:
            clipped = piece.clipped(lo, hi)
            if clipped is None:
                continue
            if clipped.knots:
                value, err = _integrate_between_knots(clipped, kernel, power)
                total += value
                error += err
                continue
            x_lo, x_hi = clipped.lo ** (1.0 / power), clipped.hi ** (1.0 / power)

            def integrand(x: float, density=clipped.density) -> float:
                tau = x**power
                return float(density(tau) * kernel(tau)) * power * x ** (power - 1)

            value, err = quad(
                integrand, x_lo, x_hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT
            )
            total += value
            error += err
        for atom in self.atoms:
            if lo <= atom.location <= hi:
                total += atom.mass * float(kernel(np.asarray(atom.location)))
        return total, error

    def check_convexity(self, n: int = 10_000, tol: float = 1e-12) -> bool:
        """Grid check that difference quotients are nondecreasing.

        Equivalent to nonnegative second differences on a uniform grid, with
        a tolerance relative to the size of Φ.
        """
        t = np.linspace(0.0, 1.0, n)
        values = np.asarray(self.value(t), dtype=float)
        second = values[2:] - 2.0 * values[1:-1] + values[:-2]
        scale = 1.0 + np.abs(values[1:-1])
        ok = bool(np.all(second >= -tol * scale))
        if not ok:
            worst = int(np.argmin(second / scale))
            logger.debug("convexity violated for %s near t=%.6f", self.spec, t[worst + 1])
        return ok


def _integrate_between_knots(piece: DensityPiece, kernel: ScalarFn, power: int) -> tuple[float, float]:
    """Gauss–Legendre on every knot interval in x = τ^{1/power}; the error is the gap to half the nodes."""
    edges = np.asarray(piece.knots, dtype=float) ** (1.0 / power)
    half_width = 0.5 * np.diff(edges)[:, None]
    middle = 0.5 * (edges[:-1] + edges[1:])[:, None]

    def rule(n_nodes: int) -> float:
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        x = middle + half_width * nodes[None, :]
        tau = x**power
        values = np.asarray(piece.density(tau)) * np.asarray(kernel(tau)) * power * x ** (power - 1)
        return float(np.sum(half_width * weights[None, :] * values))

    value = rule(KNOT_RULE_NODES)
    return value, abs(value - rule(KNOT_RULE_NODES // 2))


def _intersect(
    interval: tuple[float, float] | None, lo: float, hi: float
) -> tuple[float, float] | None:
    if interval is None:
        return None
    new_lo, new_hi = max(interval[0], lo), min(interval[1], hi)
    return (new_lo, new_hi) if new_lo < new_hi else None


def _pow(p: float) -> ConvexPhi:
    if not p > 1:
        raise ValueError(f"pow:p requires p > 1, got {p}")

    def value(t):
        return _out(_as_float_array(t) ** p)

    def derivative(t):
        return _out(p * _as_float_array(t) ** (p - 1))

    def density(t):
        t = _as_float_array(t)
        with np.errstate(divide="ignore"):
            return _out(p * (p - 1) * t ** (p - 2))

    return ConvexPhi(
        spec=f"pow:{p:g}",
        value=value,
        d_left=derivative,
        d_right=derivative,
        pieces=(DensityPiece(0.0, 1.0, density),),
        strict_interval=(0.0, 1.0),
    )


def _xlogx() -> ConvexPhi:
    def value(t):
        t = _as_float_array(t)
        return _out(xlogy(t, t))

    def derivative(t):
        t = _as_float_array(t)
        with np.errstate(divide="ignore"):
            return _out(np.log(t) + 1.0)

    def density(t):
        t = _as_float_array(t)
        with np.errstate(divide="ignore"):
            return _out(1.0 / t)

    return ConvexPhi(
        spec="xlogx",
        value=value,
        d_left=derivative,
        d_right=derivative,
        pieces=(DensityPiece(0.0, 1.0, density),),
        strict_interval=(0.0, 1.0),
    )


def _hinge(T: float) -> ConvexPhi:
    if not 0.0 < T < 1.0:
        raise ValueError(f"hinge:T requires 0 < T < 1, got {T}")

    def value(t):
        return _out(np.maximum(0.0, _as_float_array(t) - T))

    def d_left(t):
        return _out((_as_float_array(t) > T).astype(float))

    def d_right(t):
        return _out((_as_float_array(t) >= T).astype(float))

    return ConvexPhi(
        spec=f"hinge:{T:g}",
        value=value,
        d_left=d_left,
        d_right=d_right,
        atoms=(Atom(T, 1.0),),
    )


def _affine(slope: float, intercept: float) -> ConvexPhi:
    def value(t):
        return _out(slope * _as_float_array(t) + intercept)

    def derivative(t):
        return _out(np.full_like(_as_float_array(t), slope))

    return ConvexPhi(
        spec=f"affine:{slope:g},{intercept:g}",
        value=value,
        d_left=derivative,
        d_right=derivative,
    )


def builtin_phi(spec: str) -> ConvexPhi:
    """Build one of the elementary weight functions (`pow`, `xlogx`, `hinge`, `affine`).

    Raises:
        ValueError: On an unknown name or an out-of-range parameter.
    """
    name, _, arg = spec.strip().partition(":")
    try:
        if name == "pow":
            return _pow(float(arg))
        if name == "xlogx" and not arg:
            return _xlogx()
        if name == "hinge":
            return _hinge(float(arg))
        if name == "affine":
            slope, intercept = (float(x) for x in arg.split(","))
            return _affine(slope, intercept)
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid Φ spec {spec!r}: {e}") from None
    raise ValueError(f"Unknown Φ spec {spec!r}")


def parse_phi(spec: str) -> ConvexPhi:
    """Parse a Φ spec string, including the composite forms.

    Raises:
        ValueError: If the spec cannot be parsed or violates a precondition.
    """
    name, _, arg = spec.strip().partition(":")
    try:
        if name == "affcont":
            a, b, inner = arg.split(",", 2)
            return affine_continuation(parse_phi(inner), float(a), float(b))
        if name == "quadcont":
            a, inner = arg.split(",", 1)
            return quadratic_continuation(parse_phi(inner), float(a))
        if name == "mollify":
            eta, inner = arg.split(",", 1)
            return mollify(parse_phi(inner), float(eta))
    except ValueError as e:
        raise ValueError(f"Invalid Φ spec {spec!r}: {e}") from None
    return builtin_phi(spec)


def hinge_split(phi: ConvexPhi, T: float) -> tuple[ConvexPhi, ConvexPhi]:
    """Split Φ = Φ₁ + Φ₂ at T.

    Φ₁ equals Φ on [0, T] and continues with the left tangent Φ′₋(T)(t−T)+Φ(T)
    above T; Φ₂ = Φ − Φ₁ vanishes on [0, T]. Both are convex.
    """
    if not 0.0 < T < 1.0:
        raise ValueError(f"T must lie in (0, 1), got {T}")
    phi_T = float(phi.value(T))
    slope_T = float(phi.d_left(T))

    def value1(t):
        t = _as_float_array(t)
        return _out(np.where(t <= T, phi.value(np.minimum(t, T)), phi_T + slope_T * (t - T)))

    def d_left1(t):
        t = _as_float_array(t)
        return _out(np.where(t <= T, phi.d_left(np.minimum(t, T)), slope_T))

    def d_right1(t):
        t = _as_float_array(t)
        return _out(np.where(t < T, phi.d_right(np.minimum(t, T)), slope_T))

    def value2(t):
        t = _as_float_array(t)
        return _out(np.asarray(phi.value(t)) - np.asarray(value1(t)))

    def d_left2(t):
        t = _as_float_array(t)
        return _out(np.asarray(phi.d_left(t)) - np.asarray(d_left1(t)))

    def d_right2(t):
        t = _as_float_array(t)
        return _out(np.asarray(phi.d_right(t)) - np.asarray(d_right1(t)))

    below = tuple(p for p in (piece.clipped(0.0, T) for piece in phi.pieces) if p)
    above = tuple(p for p in (piece.clipped(T, 1.0) for piece in phi.pieces) if p)
    phi1 = ConvexPhi(
        spec=f"split-low:{T:g},{phi.spec}",
        value=value1,
        d_left=d_left1,
        d_right=d_right1,
        pieces=below,
        atoms=tuple(atom for atom in phi.atoms if atom.location < T),
        strict_interval=_intersect(phi.strict_interval, 0.0, T),
    )
    phi2 = ConvexPhi(
        spec=f"split-high:{T:g},{phi.spec}",
        value=value2,
        d_left=d_left2,
        d_right=d_right2,
        pieces=above,
        atoms=tuple(atom for atom in phi.atoms if atom.location >= T),
        strict_interval=_intersect(phi.strict_interval, T, 1.0),
    )
    return phi1, phi2


def affine_continuation(phi: ConvexPhi, a: float, b: float) -> ConvexPhi:
    """Φ on [a, b], continued by its one-sided tangents outside.

    Below a the slope is Φ′₊(a), above b it is Φ′₋(b); Φ″ of the result is
    supported in [a, b].
    """
    if not 0.0 < a < b < 1.0:
        raise ValueError(f"affine continuation needs 0 < a < b < 1, got a={a}, b={b}")
    phi_a, phi_b = float(phi.value(a)), float(phi.value(b))
    slope_a, slope_b = float(phi.d_right(a)), float(phi.d_left(b))

    def value(t):
        t = _as_float_array(t)
        inner = phi.value(np.clip(t, a, b))
        return _out(
            np.where(t < a, phi_a + slope_a * (t - a), np.where(t > b, phi_b + slope_b * (t - b), inner))
        )

    def d_left(t):
        t = _as_float_array(t)
        inner = phi.d_left(np.clip(t, a, b))
        return _out(np.where(t <= a, slope_a, np.where(t > b, slope_b, inner)))

    def d_right(t):
        t = _as_float_array(t)
        inner = phi.d_right(np.clip(t, a, b))
        return _out(np.where(t < a, slope_a, np.where(t >= b, slope_b, inner)))

    return ConvexPhi(
        spec=f"affcont:{a:g},{b:g},{phi.spec}",
        value=value,
        d_left=d_left,
        d_right=d_right,
        pieces=tuple(p for p in (piece.clipped(a, b) for piece in phi.pieces) if p),
        atoms=tuple(atom for atom in phi.atoms if a < atom.location < b),
        strict_interval=_intersect(phi.strict_interval, a, b),
    )


def quadratic_continuation(phi: ConvexPhi, a: float) -> ConvexPhi:
    """Replace Φ below a by its second-order Taylor polynomial at a.

    The result is C² on [0, 1] whenever Φ is C² on (a, 1]; this is the
    modification that makes t log t usable where Φ″ must stay bounded.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"quadratic continuation needs 0 < a < 1, got {a}")
    if any(atom.location <= a for atom in phi.atoms):
        raise ValueError("Φ″ must not carry atoms at or below the continuation point")
    phi_a = float(phi.value(a))
    slope_a = float(phi.d_right(a))
    curvature_a = float(phi.second_derivative(a))

    def taylor(t):
        return phi_a + slope_a * (t - a) + 0.5 * curvature_a * (t - a) ** 2

    def value(t):
        t = _as_float_array(t)
        return _out(np.where(t <= a, taylor(t), phi.value(np.maximum(t, a))))

    def derivative_from(side: ScalarFn) -> ScalarFn:
        def derivative(t):
            t = _as_float_array(t)
            return _out(np.where(t <= a, slope_a + curvature_a * (t - a), side(np.maximum(t, a))))

        return derivative

    def constant_density(t):
        return _out(np.full_like(_as_float_array(t), curvature_a))

    pieces = [DensityPiece(0.0, a, constant_density)] if curvature_a > 0 else []
    pieces.extend(p for p in (piece.clipped(a, 1.0) for piece in phi.pieces) if p)
    strict = phi.strict_interval
    if strict is not None and curvature_a > 0 and strict[0] <= a:
        strict = (0.0, strict[1])
    return ConvexPhi(
        spec=f"quadcont:{a:g},{phi.spec}",
        value=value,
        d_left=derivative_from(phi.d_left),
        d_right=derivative_from(phi.d_right),
        pieces=tuple(pieces),
        atoms=phi.atoms,
        strict_interval=strict,
    )


def _bump_profile(y):
    y = _as_float_array(y)
    inside = np.abs(y) < 1.0
    safe = np.where(inside, y, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe * safe)), 0.0)


@lru_cache(maxsize=1)
def _bump_normalization() -> float:
    value, _ = quad(lambda y: float(_bump_profile(y)), -1.0, 1.0, epsabs=0.0, epsrel=1e-12)
    return value


def bump(x: ArrayLike, eta: float):
    """The standard mollifier exp(−1/(1−y²)), normalized, scaled to width eta."""
    return _out(_bump_profile(_as_float_array(x) / eta) / (_bump_normalization() * eta))


def _mollified_curvature(phi: ConvexPhi, t: float, eta: float) -> float:
    total = sum(atom.mass * float(bump(t - atom.location, eta)) for atom in phi.atoms)
    for piece in phi.pieces:
        lo, hi = max(piece.lo, t - eta), min(piece.hi, t + eta)
        if lo >= hi:
            continue
        value, _ = quad(
            lambda tau, density=piece.density: float(density(tau)) * float(bump(t - tau, eta)),
            lo,
            hi,
            epsabs=QUAD_EPSABS,
            epsrel=QUAD_EPSREL,
            limit=QUAD_LIMIT,
        )
        total += value
    return total


def mollify(
    phi: ConvexPhi,
    eta: float,
    a: float | None = None,
    b: float | None = None,
) -> ConvexPhi:
    """Convolve Φ (affine outside [a, b]) with the standard mollifier of width eta.

    [a, b] defaults to the support hull of Φ″. The mollified Φ″ is tabulated
    on a fixed grid over [a − η, b + η], interpolated monotonically (so it
    stays nonnegative), rescaled to carry exactly the mass Φ′₊(b) − Φ′₋(a), and
    integrated twice; outside the grid the result is affine.

    Raises:
        ValueError: If Φ is not affine outside [a, b] or eta is too large.
    """
    support = phi.curvature_support()
    if support is None:
        return replace(phi, spec=f"mollify:{eta:g},{phi.spec}")
    a = support[0] if a is None else a
    b = support[1] if b is None else b
    if support[0] < a or support[1] > b:
        raise ValueError(f"Φ″ is supported on {support}, not inside [{a}, {b}]")
    if not 0.0 < a <= b < 1.0:
        raise ValueError(f"mollify needs 0 < a ≤ b < 1, got a={a}, b={b}")
    if not 0.0 < eta < min(a, 1.0 - b) / 2.0:
        raise ValueError(f"eta={eta} too large: must be below min(a, 1−b)/2 = {min(a, 1.0 - b) / 2.0:g}")

    lo, hi = a - eta, b + eta
    n = max(MOLLIFIER_GRID_POINTS, math.ceil(MOLLIFIER_NODES_PER_WIDTH * (hi - lo) / (2.0 * eta)) + 1)
    grid = np.linspace(lo, hi, n)
    samples = np.array([_mollified_curvature(phi, float(t), eta) for t in grid])
    samples[0] = samples[-1] = 0.0

    mass = float(phi.d_right(b)) - float(phi.d_left(a))
    raw = PchipInterpolator(grid, samples, extrapolate=False)
    raw_mass = float(raw.integrate(lo, hi))
    if raw_mass > 0.0:
        samples = samples * (mass / raw_mass)
    logger.debug("mollify %s: %d nodes, mass correction %.3e", phi.spec, n, raw_mass - mass)

    curvature = PchipInterpolator(grid, samples, extrapolate=False)
    first = curvature.antiderivative(1)
    second = curvature.antiderivative(2)
    first_lo = float(first(lo))
    second_lo = float(second(lo))
    slope_lo = float(phi.d_left(a))
    value_lo = float(phi.value(lo))

    def slope_inside(tc):
        return slope_lo + (first(tc) - first_lo)

    def value(t):
        t = _as_float_array(t)
        tc = np.clip(t, lo, hi)
        inner = value_lo + slope_lo * (tc - lo) + (second(tc) - second_lo - first_lo * (tc - lo))
        return _out(inner + slope_inside(tc) * (t - tc))

    def derivative(t):
        tc = np.clip(_as_float_array(t), lo, hi)
        return _out(np.asarray(slope_inside(tc), dtype=float))

    def density(t):
        tc = np.clip(_as_float_array(t), lo, hi)
        return _out(np.maximum(np.nan_to_num(curvature(tc)), 0.0))

    return ConvexPhi(
        spec=f"mollify:{eta:g},{phi.spec}",
        value=value,
        d_left=derivative,
        d_right=derivative,
        pieces=(DensityPiece(lo, hi, density, tuple(grid.tolist())),) if mass > 0 else (),
        strict_interval=(lo, hi) if mass > 0 else None,
    )
