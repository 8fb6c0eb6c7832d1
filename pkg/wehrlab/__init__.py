"""wehrlab - numerical laboratory for generalized Wehrl entropies of polynomial states."""

from importlib.metadata import version

from wehrlab.combinatorics import Params
from wehrlab.measure import entropy_G, parse_scheme, sup_G
from wehrlab.phi import parse_phi
from wehrlab.state_space import coherent_state, from_coefficients, read_state

__version__ = version("wehrlab")

__all__ = [
    "Params",
    "coherent_state",
    "entropy_G",
    "from_coefficients",
    "parse_phi",
    "parse_scheme",
    "read_state",
    "sup_G",
    "__version__",
]
