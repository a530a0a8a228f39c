"""Simulation parameters, ring configurations and the Bernoulli initial laws."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

TIME_SCALES = ("hyperbolic", "longer", "diffusive")
LAWS = ("bernoulli", "bernoulli_star")

# ring must be at least this many times the physical horizon
SAFETY_FACTOR = 4


class ParameterError(ValueError):
    """Raised when an operation is given parameters that fail validation."""


@dataclass(frozen=True)
class SimParams:
    p: float
    alpha: float
    N: int
    L: int
    gamma: float = 0.0
    time_scale: str = "hyperbolic"
    t_max: float = 1.0

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def chi(self) -> float:
        return self.alpha * (1.0 - self.alpha)

    @property
    def v(self) -> float:
        """Drift velocity of density fluctuations, (p-q)(1-2 alpha)."""
        return (self.p - self.q) * (1.0 - 2.0 * self.alpha)

    @property
    def speed(self) -> float:
        """Physical time per unit of macroscopic time."""
        if self.time_scale == "longer":
            return float(self.N) ** (1.0 + self.gamma)
        if self.time_scale == "diffusive":
            return float(self.N) ** 2
        return float(self.N)

    @property
    def horizon(self) -> float:
        return self.t_max * self.speed

    def with_(self, **changes) -> "SimParams":
        return replace(self, **changes)


def min_ring_size(N: int, time_scale: str, t_max: float, gamma: float = 0.0) -> int:
    probe = SimParams(p=1.0, alpha=0.0, N=N, L=1, gamma=gamma,
                      time_scale=time_scale, t_max=t_max)
    return max(int(math.ceil(SAFETY_FACTOR * probe.horizon)), 2)


def validate_params(params: SimParams, margin: bool = True) -> list[str]:
    """Return every violated invariant as a message; an empty list means ok.

    Warns (does not fail) when gamma >= 1/3 on the longer time scale, where
    the Boltzmann-Gibbs decay is not expected. ``margin=False`` skips the
    ring-size bound, for runs where the finite ring itself is the system.
    """
    problems = []
    if not (0.0 < params.p <= 1.0):
        problems.append(f"p={params.p} outside (0,1]")
    if not (0.0 <= params.alpha <= 1.0):
        problems.append(f"alpha={params.alpha}: density outside [0,1]")
    if not (isinstance(params.N, (int, np.integer)) and params.N >= 1):
        problems.append(f"N={params.N} must be a positive integer")
    if not (isinstance(params.L, (int, np.integer)) and params.L >= 1):
        problems.append(f"L={params.L} must be a positive integer")
    if not params.gamma >= 0.0:
        problems.append(f"gamma={params.gamma} must be >= 0")
    if params.time_scale not in TIME_SCALES:
        problems.append(f"time_scale={params.time_scale!r} not one of {TIME_SCALES}")
    if not params.t_max >= 0.0:
        problems.append(f"t_max={params.t_max} must be >= 0")
    if problems:
        return problems
    need = SAFETY_FACTOR * params.horizon
    if margin and params.L < need:
        problems.append(
            f"L={params.L} < {SAFETY_FACTOR}*horizon={need:g} "
            f"(horizon = t_max*speed = {params.horizon:g})")
    if params.time_scale == "longer" and params.gamma >= 1.0 / 3.0:
        warnings.warn(f"gamma={params.gamma} >= 1/3: Boltzmann-Gibbs decay not expected",
                      stacklevel=2)
    return problems


def check_params(params: SimParams, margin: bool = True) -> None:
    problems = validate_params(params, margin)
    if problems:
        raise ParameterError("; ".join(problems))


@dataclass
class Configuration:
    """Occupancy of a ring of L sites; site x lives at index x mod L.

    ``winding`` counts completed laps of the tagged particle around the ring
    so that its displacement stays unambiguous.
    """

    occupancy: np.ndarray
    tagged: Optional[int] = None
    winding: int = 0

    def __post_init__(self):
        self.occupancy = np.ascontiguousarray(self.occupancy, dtype=np.uint8)
        if self.occupancy.ndim != 1:
            raise ValueError("occupancy must be one-dimensional")
        if self.tagged is not None:
            self.tagged = int(self.tagged) % self.L
            if self.occupancy[self.tagged] != 1:
                raise ValueError(f"tagged site {self.tagged} is empty")

    @property
    def L(self) -> int:
        return self.occupancy.shape[0]

    @property
    def particle_count(self) -> int:
        return int(self.occupancy.sum(dtype=np.int64))

    def copy(self) -> "Configuration":
        return Configuration(self.occupancy.copy(), self.tagged, self.winding)

    def sites(self, a: int, b: int) -> np.ndarray:
        """Ring indices of the sites a..b (inclusive)."""
        if b < a:
            return np.empty(0, dtype=np.int64)
        if b - a + 1 > self.L:
            raise ValueError(f"interval [{a},{b}] exceeds ring of size {self.L}")
        return np.arange(a, b + 1, dtype=np.int64) % self.L

    def occupancy_sum(self, a: int, b: int) -> int:
        return int(self.occupancy[self.sites(a, b)].sum(dtype=np.int64))

    def to_bits(self) -> bytes:
        return np.packbits(self.occupancy, bitorder="little").tobytes()

    @classmethod
    def from_bits(cls, data: bytes, L: int, tagged: Optional[int] = None) -> "Configuration":
        occ = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=L, bitorder="little")
        return cls(occ, tagged)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (self.tagged == other.tagged and self.winding == other.winding
                and np.array_equal(self.occupancy, other.occupancy))


def hole_count(config: Configuration, a: int, b: int) -> int:
    """Number of empty sites in [a, b]; zero for an empty interval (b < a)."""
    idx = config.sites(a, b)
    return int(idx.size - config.occupancy[idx].sum(dtype=np.int64))


def sample_initial(law: str, params: SimParams, seed: int) -> Configuration:
    """Draw from nu_alpha ('bernoulli') or nu_alpha* ('bernoulli_star').

    Sites are independent Bernoulli(alpha) using numpy's PCG64 seeded by
    ``seed``; the starred law additionally occupies and tags the origin.
    """
    if law not in LAWS:
        raise ValueError(f"unknown initial law {law!r}")
    check_params(params)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    occ = (rng.random(params.L) < params.alpha).astype(np.uint8)
    if law == "bernoulli_star":
        occ[0] = 1
        return Configuration(occ, tagged=0)
    return Configuration(occ)


def replica_seed(master: int, replica: int) -> int:
    """Seed of replica r: first word of SeedSequence([master, r])."""
    ss = np.random.SeedSequence([int(master) & (2**64 - 1), int(replica)])
    return int(ss.generate_state(1, np.uint64)[0])
