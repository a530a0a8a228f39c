"""Kinetic Monte Carlo lab for the asymmetric simple exclusion process."""

from importlib.resources import files

from .engine import EventRecord, SimulationError, Simulator, make_sim, read_trace
from .lattice import (Configuration, ParameterError, SimParams, check_params, hole_count,
                      min_ring_size, replica_seed, sample_initial, validate_params)
from .testfunctions import Bump, Heaviside, Hermite, Ramp, Tabulated, parse_function

__version__ = "0.1.0"


def bundled_config(name: str):
    """Path-like handle of a config shipped with the package, e.g. 'tagged_clt.cfg'."""
    return files(__name__) / "configs" / name


__all__ = [
    "Bump", "Configuration", "EventRecord", "Heaviside", "Hermite", "ParameterError",
    "Ramp", "SimParams", "SimulationError", "Simulator", "Tabulated", "bundled_config",
    "check_params", "hole_count", "make_sim", "min_ring_size", "parse_function",
    "read_trace", "replica_seed", "sample_initial", "validate_params",
]
