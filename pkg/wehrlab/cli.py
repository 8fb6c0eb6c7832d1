"""wehrlab CLI - Main entry point."""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from wehrlab import __version__
from wehrlab.combinatorics import Params
from wehrlab.config import RunConfig, build_run_config, init_config
from wehrlab.geometry import distance_to_V
from wehrlab.hessian import hessian_coefficients
from wehrlab.logging_config import configure_logging
from wehrlab.measure import entropy_G, sup_G
from wehrlab.stability import CSV_FIELDS, stability_scan
from wehrlab.state_space import (
    PolynomialState,
    basis_state,
    coherent_state,
    random_state,
    read_state,
    state_to_dict,
)
from wehrlab.verify import LEVELS, run_suite

EXIT_OK = 0
EXIT_INVARIANT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3


def output_json(data: dict | list, file: str | None = None) -> None:
    """Output data as JSON."""
    output = json.dumps(data, indent=2)
    if file:
        with open(file, "w") as f:
            f.write(output + "\n")
    else:
        print(output)


def output_csv(rows: list[dict], file: str | None = None, fields: list[str] | None = None) -> None:
    """Output rows as CSV; columns in `fields` order, or sorted."""
    if not rows:
        return
    if fields is None:
        names: set[str] = set()
        for row in rows:
            names.update(row.keys())
        fields = sorted(names)

    f = open(file, "w", newline="") if file else sys.stdout
    writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if file:
        f.close()


def _flat_row(data: dict) -> dict:
    """Top-level scalar entries of a report, for single-row CSV output."""
    return {k: v for k, v in data.items() if isinstance(v, (int, float, str, bool)) or v is None}


def emit(config: RunConfig, report: dict, rows: list[dict] | None = None, fields: list[str] | None = None) -> None:
    """Write a report in the configured format, embedding config and version in JSON."""
    if config.format == "csv":
        output_csv(rows if rows is not None else [_flat_row(report)], config.out, fields)
        return
    output_json({"version": __version__, "config": config.echo(), **report}, config.out)


def _load_state(args: argparse.Namespace) -> PolynomialState:
    if not args.state:
        raise ValueError(f"{args.command} needs --state FILE")
    return read_state(args.state)


def cmd_init(args: argparse.Namespace) -> int:
    init_config()
    return EXIT_OK


def cmd_info(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    params = config.params
    A = params.A_table()
    c_tilde = params.c_tilde_sq_table()
    report = {
        "N": params.N,
        "M": params.M,
        "d": params.d,
        "index_order": [list(alpha) for alpha in params.index_order],
        "A_by_degree": {str(K): A[K] for K in sorted(A)},
        "c_tilde_sq_by_degree": {str(K): c_tilde[K] for K in sorted(c_tilde)},
    }
    rows = [{"K": K, "A": A[K], "c_tilde_sq": c_tilde[K]} for K in sorted(A)]
    emit(config, report, rows, ["K", "A", "c_tilde_sq"])
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    result = run_suite(config.params, args.level, seed=config.seed)
    emit(
        config,
        result.to_dict(),
        [{"name": c.name, "passed": c.passed} for c in result.checks],
        ["name", "passed"],
    )
    return EXIT_OK if result.passed else EXIT_INVARIANT_FAILURE


def cmd_entropy(args: argparse.Namespace) -> int:
    state = _load_state(args)
    config = build_run_config(args, state.params)
    value, error = entropy_G(state, config.parsed_phi, config.parsed_scheme, config.threads)
    supremum = sup_G(state.params, config.parsed_phi)
    report = {
        "value": value,
        "error": error,
        "error_policy": config.parsed_scheme.error_policy,
        "sup_G": supremum,
        "deficit": supremum - value,
    }
    emit(config, report)
    return EXIT_OK


def cmd_distance(args: argparse.Namespace) -> int:
    state = _load_state(args)
    config = build_run_config(args, state.params)
    result = distance_to_V(state, config.starts, config.seed, config.threads)
    emit(config, result.to_dict())
    return EXIT_OK


def cmd_hessian(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    coefficients = hessian_coefficients(config.params, config.parsed_phi, config.threads)
    report = coefficients.to_dict()
    rows = [
        {"K": K, "b": b, "quadrature_error": coefficients.error_by_degree[K]}
        for K, b in sorted(coefficients.by_degree.items())
    ]
    emit(config, report, rows, ["K", "b", "quadrature_error"])
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    report = stability_scan(
        config.params,
        config.parsed_phi,
        config.samples,
        config.parsed_sampler,
        config.seed,
        config.parsed_scheme,
        n_starts=config.starts,
        threads=config.threads,
    )
    emit(config, report.to_dict(), report.csv_rows(), list(CSV_FIELDS))
    return EXIT_OK


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([complex(part.replace(" ", "")) for part in text.split(",")])
    except ValueError:
        raise ValueError(f"cannot parse point {text!r}; expected e.g. 0.5+0.2j,1") from None


def _parse_basis(params: Params, text: str) -> tuple[int, ...]:
    try:
        if "," in text:
            return tuple(int(part) for part in text.split(","))
        return params.index_order[int(text)]
    except (ValueError, IndexError):
        raise ValueError(f"invalid basis index {text!r} for d={params.d}") from None


def cmd_state(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    params = config.params
    if args.coherent is not None:
        state = coherent_state(params, _parse_point(args.coherent))
    elif args.basis is not None:
        alpha = _parse_basis(params, args.basis)
        if alpha not in params.position:
            raise ValueError(f"multi-index {alpha} not in the index set for N={params.N}, M={params.M}")
        state = basis_state(params, alpha)
    else:
        state = random_state(params, config.seed)
    output_json(state_to_dict(state), config.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-p",
        "--profile",
        # SUPPRESS so an absent -p on the subparser doesn't clobber a value
        # given before the subcommand.
        default=argparse.SUPPRESS,
        help="Config profile to use",
    )
    common.add_argument(
        "-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Log progress (INFO level)"
    )

    sizes = argparse.ArgumentParser(add_help=False)
    sizes.add_argument("--N", type=int, help="Complex dimension of the base space")
    sizes.add_argument("--M", type=int, help="Maximal polynomial degree")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", "-o", help="Output file (default: stdout)")
    output.add_argument("--format", "-f", choices=["json", "csv"], help="Output format (default: json)")

    def numeric(*names: str) -> argparse.ArgumentParser:
        parent = argparse.ArgumentParser(add_help=False)
        if "phi" in names:
            parent.add_argument("--phi", help="Weight function, e.g. pow:2, xlogx, hinge:0.5")
        if "scheme" in names:
            parent.add_argument("--scheme", help="Quadrature, mc:<n>:<seed> or tensor:<radial>:<angular>")
        if "seed" in names:
            parent.add_argument("--seed", type=int, help="Random seed (default: 0)")
        if "starts" in names:
            parent.add_argument("--starts", type=int, help="Optimizer starts (default: 32)")
        if "samples" in names:
            parent.add_argument("--samples", type=int, help="Number of scan samples (default: 100)")
        if "threads" in names:
            parent.add_argument("--threads", type=int, help="Worker threads (default: CPU count)")
        return parent

    parser = argparse.ArgumentParser(
        prog="wehrlab",
        description="Numerical laboratory for generalized Wehrl entropies of polynomial states",
        parents=[common],
    )
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    init_parser = subparsers.add_parser("init", help="Create a config file template", parents=[common])
    init_parser.set_defaults(func=cmd_init)

    info_parser = subparsers.add_parser(
        "info", help="Dimension, index order and constant tables", parents=[common, sizes, output]
    )
    info_parser.set_defaults(func=cmd_info)

    verify_parser = subparsers.add_parser(
        "verify", help="Run the invariant suites", parents=[common, sizes, output, numeric("seed")]
    )
    verify_parser.add_argument("--level", choices=LEVELS, default="quick", help="Suite size (default: quick)")
    verify_parser.set_defaults(func=cmd_verify)

    entropy_parser = subparsers.add_parser(
        "entropy",
        help="Entropy G of a state file",
        parents=[common, sizes, output, numeric("phi", "scheme", "seed", "threads")],
    )
    entropy_parser.add_argument("--state", help="State file (JSON)")
    entropy_parser.set_defaults(func=cmd_entropy)

    distance_parser = subparsers.add_parser(
        "distance",
        help="Distance of a state file to the coherent states",
        parents=[common, sizes, output, numeric("seed", "starts", "threads")],
    )
    distance_parser.add_argument("--state", help="State file (JSON)")
    distance_parser.set_defaults(func=cmd_distance)

    hessian_parser = subparsers.add_parser(
        "hessian",
        help="Second-differential coefficients by degree",
        parents=[common, sizes, output, numeric("phi", "threads")],
    )
    hessian_parser.set_defaults(func=cmd_hessian)

    scan_parser = subparsers.add_parser(
        "scan",
        help="Empirical stability scan",
        parents=[common, sizes, output, numeric("phi", "scheme", "seed", "starts", "samples", "threads")],
    )
    scan_parser.add_argument("--sampler", help="uniform, coherent or near_v:<t_max>[:x0] (default: uniform)")
    scan_parser.set_defaults(func=cmd_scan)

    state_parser = subparsers.add_parser(
        "state", help="Write a state file", parents=[common, sizes, numeric("seed")]
    )
    state_parser.add_argument("--out", "-o", help="Output file (default: stdout)")
    kind = state_parser.add_mutually_exclusive_group(required=True)
    kind.add_argument("--coherent", metavar="W", help="Coherent state at w, e.g. 0.5+0.2j,1")
    kind.add_argument("--basis", metavar="K", help="Basis state by position or multi-index, e.g. 2 or 0,2")
    kind.add_argument("--random", action="store_true", help="Uniform random state from --seed")
    state_parser.set_defaults(func=cmd_state)

    args = parser.parse_args(argv)

    # SUPPRESS leaves these unset when never given; normalize them.
    if not hasattr(args, "profile"):
        args.profile = None
    if not hasattr(args, "verbose"):
        args.verbose = False

    if not args.command:
        parser.print_help()
        sys.exit(EXIT_USAGE)

    if args.verbose:
        configure_logging(logging.INFO)

    try:
        code = args.func(args)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_USAGE)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_IO)
    sys.exit(code)


if __name__ == "__main__":
    main()
