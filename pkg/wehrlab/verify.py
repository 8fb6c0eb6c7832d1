"""Named invariant suites behind `wehrlab verify`.

Each check returns a `Check` carrying the measured values next to the
verdict, so a failing report says by how much it failed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from wehrlab.combinatorics import (
    A_const,
    Params,
    c_tilde_sq_by_degree,
    incomplete_beta_primitive,
)
from wehrlab.geometry import distance_to_V, geodesic_from_X0
from wehrlab.hessian import (
    b_alpha_direct,
    bracket,
    d2G_closed_form,
    d2G_finite_difference,
    hessian_coefficients,
    h_tilde_integral,
)
from wehrlab.logging_config import get_logger
from wehrlab.measure import MonteCarloScheme, QuadratureScheme, TensorScheme, entropy_G, sup_G
from wehrlab.phi import parse_phi
from wehrlab.stability import (
    DEFICIT_SLACK,
    deficit,
    far_field_bound,
    far_field_bound_via_split,
    stability_scan,
    verify_far_field,
)
from wehrlab.state_space import (
    TangentVector,
    base_point,
    coherent_state,
    random_normal_direction,
    random_state,
)

logger = get_logger(__name__)

LEVELS = ("quick", "full")
SIGN_PHIS = ("pow:2", "pow:3", "xlogx", "mollify:0.05,hinge:0.5")
S_GRID = (0.1, 0.5, 1.0, 2.0, 10.0, math.inf)


@dataclass
class Check:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured}


@dataclass
class VerifyReport:
    params: Params
    level: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "N": self.params.N,
            "M": self.params.M,
            "level": self.level,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _default_scheme(params: Params, samples: int, seed: int) -> QuadratureScheme:
    return TensorScheme() if params.N == 1 else MonteCarloScheme(samples, seed)


def worst_of(values) -> float:
    """Largest of the values, or +inf when any of them is not finite."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        return 0.0
    return float(values.max()) if np.all(np.isfinite(values)) else math.inf


def _skipped(name: str, params: Params) -> Check:
    """Checks along normal directions have nothing to test when M < 2."""
    return Check(name, True, {"skipped": f"no normal directions for M={params.M}"})


def _normal_tangent(params: Params, rng: np.random.Generator) -> TangentVector:
    v = np.eye(params.N + 1, dtype=complex)[0]
    return TangentVector(params, random_normal_direction(params, v, rng))


def check_incomplete_beta(params: Params) -> Check:
    N, M = params.N, params.M
    errors = []
    for K in range(M + 1):
        for s in S_GRID:
            closed = incomplete_beta_primitive(M, N, K, s)
            numeric, _ = quad(
                lambda sigma: sigma ** (K + N - 1) / (1.0 + sigma) ** (M + N + 1),
                0.0,
                s,
                epsabs=1e-15,
                epsrel=1e-13,
                limit=200,
            )
            errors.append(abs(closed - numeric) / abs(numeric))
    worst = worst_of(errors)
    return Check("incomplete_beta_primitive", worst <= 1e-10, {"max_rel_error": worst})


def check_c_tilde(params: Params) -> Check:
    N, M = params.N, params.M
    worst = worst_of(
        abs(c_tilde_sq_by_degree(K, M, N) - A_const(M, N, K) / A_const(M, N, 0)) for K in range(M + 1)
    )
    return Check("c_tilde_sq_factorial_vs_A_ratio", worst <= 1e-14, {"max_abs_error": worst})


def check_c_tilde_monte_carlo(params: Params, samples: int, seed: int) -> Check:
    """c̃_α² = c_α² E|ω^α|² for ω uniform on the unit sphere of C^N."""
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((samples, params.N)) + 1j * rng.standard_normal((samples, params.N))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    sigmas = [0.0]
    for alpha, c in zip(params.index_order, params.coefficients):
        values = c**2 * np.prod(np.abs(omega) ** (2 * np.array(alpha)), axis=1)
        stderr = values.std(ddof=1) / math.sqrt(samples)
        expected = c_tilde_sq_by_degree(sum(alpha), params.M, params.N)
        if stderr > 0:
            sigmas.append(abs(values.mean() - expected) / stderr)
    worst_sigma = worst_of(sigmas)
    return Check("c_tilde_sq_monte_carlo", worst_sigma <= 4.0, {"max_sigma": worst_sigma, "samples": samples})


def check_b_signs(params: Params, phi_specs: tuple[str, ...]) -> Check:
    measured = {}
    passed = True
    for spec in phi_specs:
        coefficients = hessian_coefficients(params, parse_phi(spec))
        by_degree = coefficients.by_degree
        ok = abs(by_degree[1]) <= 1e-10 and all(by_degree[K] < -1e-6 for K in range(2, params.M + 1))
        measured[spec] = {str(K): value for K, value in by_degree.items()}
        passed = passed and ok
    return Check("b_alpha_sign_dichotomy", passed, measured)


def check_b_direct(params: Params) -> Check:
    phi = parse_phi("pow:2")
    coefficients = hessian_coefficients(params, phi).by_degree
    worst = worst_of(
        abs(coefficients[K] - b_alpha_direct(params, phi, K)) for K in range(1, params.M + 1)
    )
    return Check("b_alpha_substitution_vs_s_integral", worst <= 1e-9, {"max_abs_error": worst})


def check_bracket_negative(params: Params) -> Check:
    s = np.logspace(-6, 6, 241)
    worst = worst_of(
        np.max(bracket(params, K, s) / (1.0 + s) ** (K + params.N - 1)) for K in range(2, params.M + 1)
    )
    passed = params.M < 2 or worst < 0.0
    return Check("bracket_negative", passed, {"max_scaled_value": worst if params.M >= 2 else None})


def check_h_tilde_identity(params: Params, n_directions: int, seed: int) -> Check:
    name = "h_tilde_integral_identity"
    if params.M < 2:
        return _skipped(name, params)
    rng = np.random.default_rng(seed)
    errors = []
    for spec in ("pow:2", "mollify:0.05,hinge:0.5"):
        phi = parse_phi(spec)
        for _ in range(n_directions):
            Y = _normal_tangent(params, rng)
            closed = d2G_closed_form(params, phi, Y)
            integral, _ = h_tilde_integral(params, phi, Y)
            errors.append(abs(integral - closed) / abs(closed))
    worst = worst_of(errors)
    return Check(name, worst <= 1e-6, {"max_rel_error": worst})


def check_coherent_distance(params: Params, seed: int) -> Check:
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(params.N) + 1j * rng.standard_normal(params.N)
    result = distance_to_V(coherent_state(params, w), seed=seed)
    passed = abs(result.T - 1.0) <= 1e-10 and result.dist_geodesic <= 1e-4
    return Check("coherent_state_on_V", passed, {"T": result.T, "dist": result.dist_geodesic})


def check_geodesic_upper_bound(params: Params, seed: int) -> Check:
    name = "geodesic_distance_upper_bound"
    if params.M < 2:
        return _skipped(name, params)
    rng = np.random.default_rng(seed)
    excess = []
    for t in (0.05, 0.2, math.pi / 4):
        Y = _normal_tangent(params, rng)
        dist = distance_to_V(geodesic_from_X0(Y, t), seed=seed).dist_geodesic
        excess.append(dist - t)
    worst = worst_of(excess)
    return Check(name, worst <= 1e-6, {"max_excess": worst})


def check_far_field(params: Params) -> Check:
    phi = parse_phi("pow:2")
    grid = np.linspace(0.05, 0.95, 19)
    bounds = [far_field_bound(params, phi, float(T)) for T in grid]
    monotone = all(np.isfinite(bounds)) and all(a >= b - 1e-14 for a, b in zip(bounds, bounds[1:]))
    split_gap = worst_of(
        abs(far_field_bound(params, phi, float(T)) - far_field_bound_via_split(params, phi, float(T)))
        for T in grid[::3]
    )
    return Check(
        "far_field_bound_monotone_and_split",
        monotone and split_gap <= 1e-9,
        {"monotone": monotone, "max_split_gap": split_gap},
    )


def check_coherent_deficit(params: Params, scheme: QuadratureScheme) -> Check:
    phi = parse_phi("pow:2")
    value, error = deficit(base_point(params), phi, scheme)
    passed = abs(value) <= 3.0 * error + 1e-8
    return Check("coherent_deficit_zero", passed, {"deficit": value, "stderr": error})


def check_affine_constant(params: Params, scheme: QuadratureScheme, seed: int) -> Check:
    phi = parse_phi("affine:2,1")
    state = random_state(params, seed)
    value, error = entropy_G(state, phi, scheme)
    expected = sup_G(params, phi)
    return Check(
        "affine_phi_constant_entropy",
        abs(value - expected) <= 1e-8 + 3.0 * error and abs(expected - (2.0 / params.d + 1.0)) <= 1e-9,
        {"G": value, "sup_G": expected},
    )


def check_finite_difference(params: Params, n_directions: int, seed: int, samples: int) -> Check:
    name = "finite_difference_hessian"
    if params.M < 2:
        return _skipped(name, params)
    phi = parse_phi("pow:2")
    rng = np.random.default_rng(seed)
    scheme = TensorScheme() if params.N == 1 else MonteCarloScheme(samples, seed)
    gaps = []
    passed = True
    for _ in range(n_directions):
        Y = _normal_tangent(params, rng)
        closed = d2G_closed_form(params, phi, Y)
        numeric, noise = d2G_finite_difference(params, phi, Y, scheme=scheme)
        gap = abs(numeric - closed)
        passed = passed and gap <= max(1e-3 * abs(closed), 5.0 * noise)
        gaps.append(gap / abs(closed))
    worst = worst_of(gaps)
    return Check(name, passed and math.isfinite(worst), {"max_rel_gap": worst, "directions": n_directions})


def check_random_deficits(params: Params, n_states: int, scheme: QuadratureScheme, seed: int) -> Check:
    phi = parse_phi("pow:2")
    rng = np.random.default_rng(seed)
    margins = []
    far_field_failures = 0
    for _ in range(n_states):
        state = random_state(params, rng)
        check = verify_far_field(state, phi, scheme, seed=seed)
        margins.append(check.deficit + 3.0 * check.stderr + DEFICIT_SLACK)
        far_field_failures += not check.passed
    worst_margin = -worst_of(-m for m in margins) if margins else math.inf
    return Check(
        "maximality_and_far_field",
        worst_margin >= 0.0 and far_field_failures == 0,
        {"min_margin": worst_margin, "far_field_failures": far_field_failures, "states": n_states},
    )


def check_uniform_scan(params: Params, n_samples: int, scheme: QuadratureScheme, seed: int) -> Check:
    if params.M < 2:
        # Every state is coherent, so there is no ratio to bound.
        return _skipped("uniform_scan_min_ratio_positive", params)
    report = stability_scan(params, parse_phi("pow:2"), n_samples, "uniform", seed, scheme)
    min_ratio = report.min_ratio
    return Check(
        "uniform_scan_min_ratio_positive",
        min_ratio is not None and min_ratio > 0.0,
        {"min_ratio": min_ratio, "argmin": report.argmin, "seed": seed},
    )


def run_suite(params: Params, level: str = "quick", seed: int = 0, samples: int = 200_000) -> VerifyReport:
    """Run the named invariant checks for (N, M).

    Raises:
        ValueError: On an unknown level.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    scheme = _default_scheme(params, samples, seed)
    suite: list[Callable[[], Check]] = [
        lambda: check_incomplete_beta(params),
        lambda: check_c_tilde(params),
        lambda: check_b_signs(params, SIGN_PHIS[:1] if level == "quick" else SIGN_PHIS),
        lambda: check_b_direct(params),
        lambda: check_bracket_negative(params),
        lambda: check_h_tilde_identity(params, 2 if level == "quick" else 10, seed),
        lambda: check_coherent_distance(params, seed),
        lambda: check_geodesic_upper_bound(params, seed),
        lambda: check_far_field(params),
        lambda: check_coherent_deficit(params, scheme),
        lambda: check_affine_constant(params, scheme, seed),
    ]
    if level == "full":
        suite += [
            lambda: check_c_tilde_monte_carlo(params, samples, seed),
            lambda: check_finite_difference(params, 3, seed, samples),
            lambda: check_random_deficits(params, 10, scheme, seed),
            lambda: check_uniform_scan(params, 10, scheme, seed),
        ]
    checks = []
    for run in suite:
        check = run()
        logger.info("%s: %s", check.name, "pass" if check.passed else "FAIL")
        checks.append(check)
    return VerifyReport(params, level, checks)
