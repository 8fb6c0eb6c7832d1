import argparse

import pytest

from wehrlab import config
from wehrlab.combinatorics import Params
from wehrlab.config import build_run_config, default_scheme, get_profile, init_config, load_config
from wehrlab.measure import MonteCarloScheme, TensorScheme


def namespace(command="entropy", **kwargs):
    return argparse.Namespace(command=command, **kwargs)


def test_missing_file_gives_defaults(config_file):
    assert load_config() == {}
    assert get_profile() == {}


def test_named_profiles(config_file):
    config_file.parent.mkdir(parents=True)
    config_file.write_text(
        'default_profile = "a"\n[profiles.a]\nphi = "pow:3"\nseed = 4\n[profiles.b]\nsamples = 7\n'
    )
    assert get_profile() == {"phi": "pow:3", "seed": 4}
    assert get_profile("b") == {"samples": 7}
    with pytest.raises(ValueError, match="not found"):
        get_profile("c")


def test_flat_file_is_single_profile(config_file):
    config_file.parent.mkdir(parents=True)
    config_file.write_text('phi = "xlogx"\nstarts = 8\ncolour = "red"\n')
    assert get_profile() == {"phi": "xlogx", "starts": 8}


@pytest.mark.parametrize("line", ['seed = "zero"', "phi = 2", "samples = true"])
def test_profile_type_errors(config_file, line):
    config_file.parent.mkdir(parents=True)
    config_file.write_text(line + "\n")
    with pytest.raises(ValueError):
        get_profile()


def test_flags_override_profile(config_file):
    config_file.parent.mkdir(parents=True)
    config_file.write_text('phi = "pow:3"\nseed = 4\nsamples = 9\n')
    run = build_run_config(namespace(N=1, M=2, seed=11))
    assert run.phi == "pow:3"
    assert run.seed == 11
    assert run.samples == 9
    assert run.params == Params(1, 2)


def test_default_scheme_depends_on_dimension(config_file):
    assert default_scheme(Params(1, 3), 0) == "tensor:64"
    assert default_scheme(Params(2, 3), 5) == "mc:200000:5"
    assert build_run_config(namespace(N=1, M=2)).parsed_scheme == TensorScheme(64)
    assert build_run_config(namespace(N=2, M=2, seed=3)).parsed_scheme == MonteCarloScheme(200_000, 3)


def test_params_from_state_file(config_file):
    run = build_run_config(namespace(command="distance"), params=Params(2, 3))
    assert (run.N, run.M) == (2, 3)
    with pytest.raises(ValueError):
        build_run_config(namespace(command="distance", N=1), params=Params(2, 3))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"phi": "cosh"},
        {"scheme": "tensor:32", "N": 2, "M": 2},
        {"sampler": "near_v:9"},
        {"format": "xml"},
        {"starts": 0},
        {"N": 0, "M": 2},
    ],
)
def test_bad_settings_rejected(config_file, kwargs):
    with pytest.raises(ValueError):
        build_run_config(namespace(**kwargs))


def test_params_required_when_used(config_file):
    run = build_run_config(namespace(command="verify"))
    with pytest.raises(ValueError, match="--N and --M"):
        run.params


def test_echo_omits_threads(config_file):
    echo = build_run_config(namespace(N=1, M=2, threads=3)).echo()
    assert "threads" not in echo and "parsed_phi" not in echo
    assert echo["scheme"] == "tensor:64"


def test_init_config(config_file, capsys):
    init_config()
    assert config_file.read_text() == config.TEMPLATE
    assert get_profile() == {"phi": "pow:2", "seed": 0, "starts": 32, "samples": 100, "format": "json"}
    config_file.write_text('phi = "xlogx"\n')
    init_config()
    assert "already exists" in capsys.readouterr().out
    assert config_file.read_text() == 'phi = "xlogx"\n'
