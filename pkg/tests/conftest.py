import numpy as np
import pytest

from wehrlab.combinatorics import Params
from wehrlab.phi import parse_phi


@pytest.fixture
def p12() -> Params:
    return Params(1, 2)


@pytest.fixture
def p13() -> Params:
    return Params(1, 3)


@pytest.fixture
def p22() -> Params:
    return Params(2, 2)


@pytest.fixture
def pow2():
    return parse_phi("pow:2")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def config_file(tmp_path, monkeypatch):
    """Point the config module at a file under tmp_path."""
    path = tmp_path / "wehrlab" / "config.toml"
    monkeypatch.setattr("wehrlab.config.CONFIG_FILE", path)
    return path
