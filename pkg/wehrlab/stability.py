"""Entropy deficits, the far-field lower bound and empirical stability scans.

A scan draws states from a sampler, computes the deficit sup G − G(X) and
the geodesic distance to V for each, and reports the ratio deficit/dist².
The minimum ratio is an empirical witness for the stability constant.

Sampler spec strings:

    uniform                    uniform on the unit sphere of C^d
    coherent                   coherent states with ν-distributed centre
    near_v:<t_max>             geodesic perturbations of random coherent states
                               along random normal directions, t ∈ (0, t_max]
    near_v:<t_max>:x0          the same, always starting from X₀
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad

from wehrlab.combinatorics import Params
from wehrlab.geometry import DEFAULT_STARTS, distance_to_V, geodesic
from wehrlab.logging_config import get_logger
from wehrlab.measure import (
    Estimate,
    QuadratureScheme,
    entropy_G,
    integrate_combination,
    mu0,
    sup_G,
)
from wehrlab.phi import ConvexPhi, hinge_split
from wehrlab.state_space import (
    PolynomialState,
    coherent_from_direction,
    random_normal_direction,
    random_state,
)

logger = get_logger(__name__)

# Ratios are only formed above this geodesic distance.
RATIO_GUARD = 1e-6
# Absolute slack added to statistical comparisons of deficits.
DEFICIT_SLACK = 1e-9
# T this close to 1 counts as coherent for the far-field bound.
COHERENT_T = 1.0 - 1e-12


def deficit(
    state: PolynomialState,
    phi: ConvexPhi,
    scheme: QuadratureScheme,
    threads: int = 1,
    reference: PolynomialState | None = None,
) -> Estimate:
    """sup G − G(X) with its error estimate.

    With a coherent `reference` state the deficit is estimated as
    G(reference) − G(X) on common nodes, which is far less noisy for X close
    to V; the reference must be coherent for the result to be a deficit.
    """
    if reference is not None:
        return integrate_combination([reference, state], [1.0, -1.0], phi, scheme, threads)
    value, error = entropy_G(state, phi, scheme, threads)
    return Estimate(sup_G(state.params, phi) - value, error)


def far_field_bound(params: Params, phi: ConvexPhi, T: float) -> float:
    """∫_T^1 (Φ′(t) − Φ′₋(T)) μ₀(t) dt, a lower bound for the deficit of states with Husimi supremum T.

    Raises:
        ValueError: If T ∉ (0, 1).
    """
    if not 0.0 < T < 1.0:
        raise ValueError(f"T must lie in (0, 1), got {T}")
    slope_T = float(phi.d_left(T))
    breakpoints = [k for k in phi.kinks if T < k < 1.0]

    def integrand(t: float) -> float:
        return (float(phi.d_right(t)) - slope_T) * mu0(params, t)

    value, _ = quad(integrand, T, 1.0, points=breakpoints or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return max(value, 0.0)


def far_field_bound_via_split(params: Params, phi: ConvexPhi, T: float) -> float:
    """sup G₂ for the part Φ₂ of Φ above T; equals `far_field_bound` by the layer-cake formula."""
    _, upper = hinge_split(phi, T)
    return sup_G(params, upper)


@dataclass(frozen=True)
class FarFieldCheck:
    deficit: float
    stderr: float
    T: float
    bound: float
    passed: bool


def verify_far_field(
    state: PolynomialState,
    phi: ConvexPhi,
    scheme: QuadratureScheme,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    threads: int = 1,
) -> FarFieldCheck:
    """Check deficit(X) ≥ far_field_bound(T(X)) − 3·stderr."""
    distance = distance_to_V(state, n_starts, seed, threads)
    value, error = deficit(state, phi, scheme, threads)
    T = distance.T
    bound = 0.0 if T >= COHERENT_T else far_field_bound(state.params, phi, T)
    passed = value >= bound - 3.0 * error - DEFICIT_SLACK
    if not passed:
        logger.warning("far-field check failed: deficit %.6g < bound %.6g at T=%.6g", value, bound, T)
    return FarFieldCheck(deficit=value, stderr=error, T=T, bound=bound, passed=passed)


@dataclass(frozen=True)
class Sampler:
    kind: str
    t_max: float | None = None
    from_x0: bool = False

    @property
    def spec(self) -> str:
        if self.kind != "near_v":
            return self.kind
        return f"near_v:{self.t_max:g}" + (":x0" if self.from_x0 else "")


def parse_sampler(spec: str) -> Sampler:
    """Parse a sampler spec string.

    Raises:
        ValueError: On unknown samplers or t_max outside (0, π/2].
    """
    name, *fields = spec.strip().split(":")
    name = name.lower()
    if name in ("uniform", "uniform_sphere") and not fields:
        return Sampler("uniform")
    if name == "coherent" and not fields:
        return Sampler("coherent")
    if name == "near_v" and len(fields) in (1, 2):
        try:
            t_max = float(fields[0])
        except ValueError:
            raise ValueError(f"Invalid sampler {spec!r}: t_max must be a number") from None
        if not 0.0 < t_max <= math.pi / 2:
            raise ValueError(f"Invalid sampler {spec!r}: t_max must lie in (0, π/2]")
        if len(fields) == 2 and fields[1] != "x0":
            raise ValueError(f"Invalid sampler {spec!r}: base must be x0")
        return Sampler("near_v", t_max, from_x0=len(fields) == 2)
    raise ValueError(f"Unknown sampler {spec!r}; expected uniform, coherent or near_v:<t_max>[:x0]")


def _random_direction(params: Params, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector of C^{N+1}; the coherent centre it defines is ν-distributed."""
    v = rng.standard_normal(params.N + 1) + 1j * rng.standard_normal(params.N + 1)
    return v / np.linalg.norm(v)


def draw_state(
    params: Params,
    sampler: Sampler,
    rng: np.random.Generator,
    direction: ArrayLike | None = None,
) -> tuple[PolynomialState, float | None]:
    """One state from the sampler, with the geodesic parameter for near_v samples."""
    if sampler.kind == "uniform":
        return random_state(params, rng), None
    if sampler.kind == "coherent":
        return coherent_from_direction(params, _random_direction(params, rng)), None
    v = np.eye(params.N + 1, dtype=complex)[0] if sampler.from_x0 else _random_direction(params, rng)
    base = coherent_from_direction(params, v)
    Y = np.asarray(direction, dtype=complex) if direction is not None else random_normal_direction(params, v, rng)
    t = sampler.t_max * (1.0 - rng.random())
    return geodesic(base, Y, t), t


@dataclass(frozen=True)
class ScanRecord:
    seed_index: int
    deficit: float | None = None
    deficit_stderr: float | None = None
    T: float | None = None
    D_euclid: float | None = None
    dist_geodesic: float | None = None
    ratio: float | None = None
    t: float | None = None
    error: str | None = None


CSV_FIELDS = tuple(ScanRecord.__dataclass_fields__)


@dataclass(frozen=True)
class ScanReport:
    params: Params
    phi_id: str
    sampler: str
    scheme: str
    seed: int
    n_starts: int
    records: list[ScanRecord] = field(repr=False)

    @property
    def ratios(self) -> list[tuple[int, float]]:
        return [(r.seed_index, r.ratio) for r in self.records if r.ratio is not None]

    @property
    def min_ratio(self) -> float | None:
        ratios = self.ratios
        return min(ratio for _, ratio in ratios) if ratios else None

    @property
    def argmin(self) -> int | None:
        ratios = self.ratios
        return min(ratios, key=lambda item: (item[1], item[0]))[0] if ratios else None

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    def aggregates(self) -> dict:
        return {
            "min_ratio": self.min_ratio,
            "argmin": self.argmin,
            "count": len(self.records),
            "ratio_count": len(self.ratios),
            "failed": self.n_failed,
            "scheme": self.scheme,
            "sampler": self.sampler,
            "seed": self.seed,
            "n_starts": self.n_starts,
        }

    def to_dict(self) -> dict:
        return {
            "N": self.params.N,
            "M": self.params.M,
            "phi": self.phi_id,
            "aggregates": self.aggregates(),
            "samples": [asdict(r) for r in self.records],
        }

    def csv_rows(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def _scan_one(
    index: int,
    seed_seq: np.random.SeedSequence,
    params: Params,
    phi: ConvexPhi,
    sampler: Sampler,
    scheme: QuadratureScheme,
    n_starts: int,
    direction: ArrayLike | None,
) -> ScanRecord:
    rng = np.random.default_rng(seed_seq)
    optimizer_seed = int(seed_seq.generate_state(1)[0])
    try:
        state, t = draw_state(params, sampler, rng, direction)
        distance = distance_to_V(state, n_starts, optimizer_seed)
        reference = coherent_from_direction(params, distance.argmax_v)
        value, error = deficit(state, phi, scheme, reference=reference)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.warning("scan sample %d failed: %s", index, e)
        return ScanRecord(seed_index=index, error=str(e))
    dist = distance.dist_geodesic
    return ScanRecord(
        seed_index=index,
        deficit=value,
        deficit_stderr=error,
        T=distance.T,
        D_euclid=distance.D_euclid,
        dist_geodesic=dist,
        ratio=value / dist**2 if dist > RATIO_GUARD else None,
        t=t,
    )


def stability_scan(
    params: Params,
    phi: ConvexPhi,
    n_samples: int,
    sampler: Sampler | str,
    seed: int,
    scheme: QuadratureScheme,
    n_starts: int = DEFAULT_STARTS,
    threads: int = 1,
    direction: ArrayLike | None = None,
) -> ScanReport:
    """Deficit and distance for n_samples states; deterministic given seed.

    Each sample gets its own child seed, so the report does not depend on
    `threads`. Deficits use the coherent state at the Husimi maximizer as a
    common-node reference. `direction` fixes the normal direction of near_v
    samplers (it must be normal at the base point).
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    if isinstance(sampler, str):
        sampler = parse_sampler(sampler)
    children = np.random.SeedSequence(seed).spawn(n_samples)
    args = (params, phi, sampler, scheme, n_starts, direction)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = {executor.submit(_scan_one, i, child, *args): i for i, child in enumerate(children)}
            records = sorted((future.result() for future in futures), key=lambda r: r.seed_index)
    else:
        records = [_scan_one(i, child, *args) for i, child in enumerate(children)]
    report = ScanReport(
        params=params,
        phi_id=phi.spec,
        sampler=sampler.spec,
        scheme=scheme.spec,
        seed=seed,
        n_starts=n_starts,
        records=records,
    )
    logger.info("scan: %d samples, min ratio %s", n_samples, report.min_ratio)
    return report
