"""Configuration handling for wehrlab.

Run defaults live in profiles of a TOML file under the user config directory:

    default_profile = "desk"

    [profiles.desk]
    phi = "pow:2"
    scheme = "mc:200000:0"
    seed = 0

A file without a `[profiles]` table is read as a single profile.
"""

import argparse
import os
import sys
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path

from platformdirs import user_config_dir

from wehrlab.combinatorics import Params
from wehrlab.logging_config import get_logger
from wehrlab.measure import QuadratureScheme, check_compatible, parse_scheme
from wehrlab.phi import ConvexPhi, parse_phi
from wehrlab.stability import Sampler, parse_sampler

logger = get_logger(__name__)

CONFIG_DIR = Path(user_config_dir("wehrlab", appauthor=False))
CONFIG_FILE = CONFIG_DIR / "config.toml"

FORMATS = ("json", "csv")
PROFILE_KEYS = {
    "phi": str,
    "scheme": str,
    "sampler": str,
    "seed": int,
    "starts": int,
    "samples": int,
    "threads": int,
    "format": str,
}
DEFAULTS = {
    "phi": "pow:2",
    "sampler": "uniform",
    "seed": 0,
    "starts": 32,
    "samples": 100,
    "threads": os.cpu_count() or 1,
    "format": "json",
}
# Monte Carlo size used by the default scheme when N > 1.
DEFAULT_MC_SAMPLES = 200_000


def default_scheme(params: Params, seed: int) -> str:
    return "tensor:64" if params.N == 1 else f"mc:{DEFAULT_MC_SAMPLES}:{seed}"


def load_config(path: Path | None = None) -> dict:
    """Load the TOML config file; a missing file gives an empty dict."""
    path = path or CONFIG_FILE
    if not path.exists():
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


def get_profile(profile: str | None = None, path: Path | None = None) -> dict:
    """Settings of the named profile (or the default one).

    Raises:
        ValueError: If an explicitly requested profile does not exist, or a
            value has the wrong type.
    """
    config = load_config(path)
    profile_name = profile or config.get("default_profile", "default")
    profiles = config.get("profiles", {})
    if profile_name in profiles:
        settings = dict(profiles[profile_name])
    elif "profiles" not in config and any(key in config for key in PROFILE_KEYS):
        # Flat file: the top level is the only profile.
        settings = {key: value for key, value in config.items() if key != "default_profile"}
    elif profile:
        available = ", ".join(profiles) or "(none)"
        raise ValueError(f"Profile '{profile}' not found in {path or CONFIG_FILE}; available: {available}")
    else:
        return {}

    for key, value in settings.items():
        expected = PROFILE_KEYS.get(key)
        if expected is None:
            logger.warning("ignoring unknown key %r in profile %r", key, profile_name)
        elif not isinstance(value, expected) or isinstance(value, bool):
            raise ValueError(f"profile {profile_name!r}: {key} must be {expected.__name__}, got {value!r}")
    return {key: value for key, value in settings.items() if key in PROFILE_KEYS}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI invocation.

    Spec strings are parsed when the config is built, so a bad `--phi` or
    `--scheme` fails before any computation.
    """

    command: str
    N: int | None = None
    M: int | None = None
    phi: str = DEFAULTS["phi"]
    scheme: str | None = None
    sampler: str = DEFAULTS["sampler"]
    seed: int = DEFAULTS["seed"]
    starts: int = DEFAULTS["starts"]
    samples: int = DEFAULTS["samples"]
    threads: int = DEFAULTS["threads"]
    out: str | None = None
    format: str = DEFAULTS["format"]
    level: str | None = None
    state: str | None = None
    profile: str | None = None
    parsed_phi: ConvexPhi | None = field(default=None, repr=False, compare=False)
    parsed_scheme: QuadratureScheme | None = field(default=None, repr=False, compare=False)
    parsed_sampler: Sampler | None = field(default=None, repr=False, compare=False)

    @property
    def params(self) -> Params:
        if self.N is None or self.M is None:
            raise ValueError(f"{self.command} needs --N and --M (or --state)")
        return Params(self.N, self.M)

    def echo(self) -> dict:
        """The settings as embedded in reports; thread count excluded since results do not depend on it."""
        skip = {"parsed_phi", "parsed_scheme", "parsed_sampler", "threads", "out"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


def build_run_config(args: argparse.Namespace, params: Params | None = None) -> RunConfig:
    """Merge CLI flags over the selected profile over built-in defaults.

    `params` overrides --N/--M when the command reads them from a state file.

    Raises:
        ValueError: On unknown profiles, bad values or unparsable specs.
    """
    profile = get_profile(getattr(args, "profile", None))

    def pick(key: str):
        value = getattr(args, key, None)
        if value is not None:
            return value
        return profile.get(key, DEFAULTS.get(key))

    N, M = getattr(args, "N", None), getattr(args, "M", None)
    if params is not None:
        if (N is not None and N != params.N) or (M is not None and M != params.M):
            raise ValueError(f"--N/--M disagree with the state file (N={params.N}, M={params.M})")
        N, M = params.N, params.M
    if N is not None and M is not None:
        Params(N, M)

    seed = pick("seed")
    fmt = pick("format")
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    for key in ("starts", "samples", "threads"):
        if pick(key) < 1:
            raise ValueError(f"--{key} must be at least 1, got {pick(key)}")

    scheme = pick("scheme")
    parsed_scheme = None
    if N is not None and M is not None:
        scheme = scheme or default_scheme(Params(N, M), seed)
        parsed_scheme = parse_scheme(scheme)
        check_compatible(Params(N, M), parsed_scheme)

    phi = pick("phi")
    sampler = pick("sampler")
    return RunConfig(
        command=args.command,
        N=N,
        M=M,
        phi=phi,
        scheme=scheme,
        sampler=sampler,
        seed=seed,
        starts=pick("starts"),
        samples=pick("samples"),
        threads=pick("threads"),
        out=getattr(args, "out", None),
        format=fmt,
        level=getattr(args, "level", None),
        state=getattr(args, "state", None),
        profile=getattr(args, "profile", None),
        parsed_phi=parse_phi(phi),
        parsed_scheme=parsed_scheme,
        parsed_sampler=parse_sampler(sampler),
    )


TEMPLATE = """\
# wehrlab configuration
# Values here are defaults; command-line flags override them.

# Profile used when --profile is not given
default_profile = "desk"

[profiles.desk]
phi = "pow:2"
seed = 0
starts = 32
samples = 100
format = "json"

[profiles.heavy]
phi = "pow:2"
scheme = "mc:2000000:0"
sampler = "uniform"
seed = 0
starts = 64
samples = 1000
"""


def init_config() -> None:
    """Write a template config file unless one exists."""
    if CONFIG_FILE.exists():
        print(f"Config file already exists: {CONFIG_FILE}")
        print("Edit it directly or delete it first to reinitialize.")
        return
    CONFIG_FILE.parent.mkdir(parents=True, exist_ok=True)
    CONFIG_FILE.write_text(TEMPLATE)
    print(f"Config file created: {CONFIG_FILE}", file=sys.stderr)
