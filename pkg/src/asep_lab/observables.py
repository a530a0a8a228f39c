"""Observables of the exclusion process.

Currents and the tagged displacement are event counters kept by the kernel.
Fields are pure functions of a configuration. Quadratic (Boltzmann-Gibbs)
integrals are kernel accumulators whose prefactor is applied on readout.

Real-valued summation limits are floored throughout, and the comoving frame
shifts by floor(v t speed) sites, the same shift the moving bond uses.
"""

from __future__ import annotations

import math

import numpy as np

from .engine import SimulationError, Simulator
from .lattice import Configuration, SimParams, hole_count
from .testfunctions import TestFunction

FRAMES = ("static", "comoving")


class ObservableError(ValueError):
    pass


def comoving_shift(params: SimParams, t: float) -> int:
    return math.floor(params.v * t * params.speed)


def field_window(params: SimParams, H: TestFunction, t: float = 0.0,
                 frame: str = "static") -> tuple[np.ndarray, np.ndarray]:
    """Sites (signed coordinates) and weights H(arg) over H's numerical support."""
    if frame not in FRAMES:
        raise ObservableError(f"unknown frame {frame!r}")
    lo, hi = H.support()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ObservableError(f"{H!r} has no compact numerical support")
    shift = comoving_shift(params, t) if frame == "comoving" else 0
    N = params.N
    a = math.ceil(lo * N) + shift
    b = math.floor(hi * N) + shift
    if b - a + 1 > params.L:
        raise ObservableError(
            f"support of {H!r} spans {b - a + 1} sites, more than the ring (L={params.L})")
    sites = np.arange(a, b + 1, dtype=np.int64)
    return sites, np.asarray(H((sites - shift) / N), dtype=np.float64)


def field_value(config: Configuration, H: TestFunction, t: float, frame: str = "static",
                *, params: SimParams) -> float:
    """(1/sqrt N) sum_x H(arg) (eta(x) - alpha), arg = x/N or (x - shift)/N."""
    sites, w = field_window(params, H, t, frame)
    occ = config.occupancy[sites % config.L].astype(np.float64)
    return float(np.dot(w, occ - params.alpha) / math.sqrt(params.N))


class FieldProbe:
    """Field evaluator with weights cached per checkpoint time."""

    def __init__(self, params: SimParams, H: TestFunction, frame: str = "static"):
        self.params = params
        self.H = H
        self.frame = frame
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def window(self, t: float):
        key = 0.0 if self.frame == "static" else t
        if key not in self._cache:
            sites, w = field_window(self.params, self.H, t, self.frame)
            self._cache[key] = (sites % self.params.L, w)
        return self._cache[key]

    def __call__(self, occupancy: np.ndarray, t: float) -> float:
        idx, w = self.window(t)
        centered = occupancy[idx] - self.params.alpha
        return float(np.dot(w, centered) / math.sqrt(self.params.N))


# -- currents --------------------------------------------------------------

def register_bond(sim: Simulator, x: int) -> None:
    sim.register_bond(x)


def bond_current(sim: Simulator, x: int) -> int:
    """Net right-crossings of bond [x, x+1] since time 0."""
    try:
        return sim.bond_count(x)
    except SimulationError as exc:
        raise ObservableError(str(exc)) from None


def register_moving_bond(sim: Simulator, x: int) -> None:
    if sim.params.time_scale != "longer":
        raise ObservableError("moving bond currents are defined on the longer time scale")
    sim.register_moving_bond(x)


def moving_bond_current(sim: Simulator, x: int) -> int:
    """Current through [y_s, y_s+1], y_s = x + floor(v s N^{1+gamma}).

    Executed crossings of the current bond count +-1; each time the offset
    steps right the occupancy of the site passed over is subtracted (added
    back when it steps left).
    """
    try:
        return sim.moving_bond(x)[0]
    except SimulationError as exc:
        raise ObservableError(str(exc)) from None


def moving_bond_offset(sim: Simulator, x: int) -> int:
    return sim.moving_bond(x)[1]


def stationary_current_mean(params: SimParams, t: float) -> float:
    """E[J] over [0, t] under nu_alpha: (p-q) chi(alpha) t speed."""
    return (params.p - params.q) * params.chi * t * params.speed


def moving_current_mean(params: SimParams, t: float) -> float:
    return (params.p - params.q) * params.alpha**2 * t * params.speed


# -- tagged particle -------------------------------------------------------

def tagged_position(sim: Simulator) -> int:
    """Winding-corrected displacement of the tagged particle from its start."""
    try:
        return sim.tagged_displacement()
    except SimulationError as exc:
        raise ObservableError(str(exc)) from None


def tagged_mean(params: SimParams, t: float) -> float:
    """v_t * speed = (p-q)(1-alpha) t speed."""
    return (params.p - params.q) * (1.0 - params.alpha) * t * params.speed


def tagged_readout_gap(sim: Simulator) -> float:
    """X_t/sqrt N - holes_0[0, floor((p-q) alpha t speed)]/(alpha sqrt N)."""
    params = sim.params
    if params.p <= params.q:
        raise ObservableError("readout gap needs p > q")
    if sim.initial.tagged is None:
        raise ObservableError("readout gap needs a tagged start (bernoulli_star)")
    if params.alpha <= 0:
        raise ObservableError("readout gap needs alpha > 0")
    end = math.floor((params.p - params.q) * params.alpha * sim.time * params.speed)
    holes = hole_count(sim.initial, sim.initial.tagged, sim.initial.tagged + end)
    root = math.sqrt(params.N)
    return tagged_position(sim) / root - holes / (params.alpha * root)


def current_readout_gap(sim: Simulator, x: int) -> float:
    """(J_{x-1,x} - mean)/sqrt N - sum_{y=x-floor(vtN)}^{x-1} eta_bar_0(y)/sqrt N."""
    params = sim.params
    if params.time_scale != "hyperbolic":
        raise ObservableError("current readout gap is defined on the hyperbolic scale")
    if not params.v > 0:
        raise ObservableError(f"current readout gap needs v > 0 (v={params.v})")
    t = sim.time
    root = math.sqrt(params.N)
    centered = (bond_current(sim, x - 1) - stationary_current_mean(params, t)) / root
    lag = math.floor(params.v * t * params.N)
    window = sim.initial.sites(x - lag, x - 1)
    initial = float(np.sum(sim.initial.occupancy[window] - params.alpha)) if lag > 0 else 0.0
    return centered - initial / root


# -- quadratic field --------------------------------------------------------

def quadratic_weights(params: SimParams, H: TestFunction) -> np.ndarray:
    """Ring weights w[x mod L] = H(x/N) over H's numerical support."""
    sites, w = field_window(params, H, 0.0, "static")
    full = np.zeros(params.L, dtype=np.float64)
    np.add.at(full, sites % params.L, w)
    return full


def register_bg(sim: Simulator, H: TestFunction) -> None:
    sim.register_quadratic(("bg", H), quadratic_weights(sim.params, H))


def bg_integral(sim: Simulator, H: TestFunction, b: float) -> float:
    """N^b / sqrt(N) * int_0^t S(eta_s) ds, ds in macroscopic time."""
    try:
        _, integral = sim.quadratic(("bg", H))
    except SimulationError as exc:
        raise ObservableError(str(exc)) from None
    N = sim.params.N
    return N**b / math.sqrt(N) * integral / sim.params.speed


def quadratic_sum(config: Configuration, weights: np.ndarray, alpha: float) -> float:
    """S(eta) = sum_x w[x] (eta(x)-alpha)(eta(x+1)-alpha), recomputed from scratch."""
    e = config.occupancy.astype(np.float64) - alpha
    return float(np.dot(weights, e * np.roll(e, -1)))


# -- pathwise identities -----------------------------------------------------

def conservation_holds(sim: Simulator, x: int) -> bool:
    """J_{x-1,x}(t) - J_{x,x+1}(t) == eta_t(x) - eta_0(x)."""
    L = sim.params.L
    lhs = bond_current(sim, x - 1) - bond_current(sim, x)
    rhs = int(sim.occ[x % L]) - int(sim.initial.occupancy[x % L])
    return lhs == rhs


def tagged_current_relation_check(sim: Simulator, n: int) -> bool:
    """Whether {X_t >= n} <=> {J_{-1,0}(t) >= sum_{x=0}^{n-1} eta_t(x)} holds now.

    For n <= 0 the sum runs backwards: sum_{x=0}^{n-1} = -sum_{x=n}^{-1}.
    Positions are relative to the tagged particle's starting site.
    """
    origin = sim.initial.tagged
    if origin is None:
        raise ObservableError("relation needs a tagged start")
    L = sim.params.L
    if n > 0:
        s = int(sim.occ[np.arange(origin, origin + n) % L].sum())
    else:
        s = -int(sim.occ[np.arange(origin + n, origin) % L].sum())
    X = tagged_position(sim)
    J = bond_current(sim, origin - 1)
    return (X >= n) == (J >= s)
