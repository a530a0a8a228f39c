"""Experiment descriptors: what one replica simulates and measures.

An ``Experiment`` fixes the parameters, the initial law, the checkpoint
times and a list of observables. ``run_one(seed)`` returns, for every
observable, one value per checkpoint, plus the count of pathwise-identity
violations seen at the checkpoints (``_violations``).

Seeds: the initial configuration is drawn with the replica seed itself and
the dynamics use replica_seed(seed, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import observables as obs
from .engine import Simulator
from .lattice import SimParams, check_params, replica_seed, sample_initial
from .stats import ReplicaPlan, ReplicaResult, run_replicas
from .testfunctions import TestFunction, parse_function

KINDS = ("tagged", "current", "moving_current", "field", "field_increment", "bg",
         "tagged_gap", "current_gap")
SCALES = ("raw", "lln", "clt")
RELATION_RANGE = 20


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ObsSpec:
    id: str
    kind: str
    site: int = 0
    scale: str = "raw"
    function: Optional[TestFunction] = None
    frame: str = "static"
    b: float = 0.0

    @classmethod
    def build(cls, id, kind, **opts):
        if kind not in KINDS:
            raise ExperimentError(f"{id}: unknown observable kind {kind!r}")
        if isinstance(opts.get("function"), str):
            opts["function"] = parse_function(opts["function"])
        spec = cls(id, kind, **opts)
        if spec.scale not in SCALES:
            raise ExperimentError(f"{id}: scale must be one of {SCALES}")
        if kind in ("field", "field_increment", "bg") and spec.function is None:
            raise ExperimentError(f"{id}: kind {kind} needs a function")
        return spec


@dataclass
class Experiment:
    name: str
    params: SimParams
    law: str
    checkpoints: tuple
    observables: list = field(default_factory=list)
    check_identities: bool = True

    def __post_init__(self):
        check_params(self.params)
        ts = tuple(float(t) for t in self.checkpoints)
        if not ts or any(t < 0 or t > self.params.t_max * (1 + 1e-12) for t in ts):
            raise ExperimentError(f"checkpoints must lie in [0, t_max={self.params.t_max}]")
        if list(ts) != sorted(ts):
            raise ExperimentError("checkpoints must be increasing")
        self.checkpoints = ts
        for spec in self.observables:
            if spec.kind in ("tagged", "tagged_gap") and self.law != "bernoulli_star":
                raise ExperimentError(f"{spec.id}: needs initial_law = bernoulli_star")

    @property
    def tagged(self) -> bool:
        return self.law == "bernoulli_star"

    def expected_events(self) -> float:
        """Mean number of attempts per replica: alpha L times the horizon."""
        last = self.checkpoints[-1] * self.params.speed
        return self.params.alpha * self.params.L * last

    # -- one replica -----------------------------------------------------
    def build_sim(self, seed: int) -> Simulator:
        config = sample_initial(self.law, self.params, seed)
        sim = Simulator(self.params, config, replica_seed(seed, 1))
        sim.register_bond(-1)
        sim.register_bond(0)
        for spec in self.observables:
            if spec.kind in ("current",):
                sim.register_bond(spec.site)
            elif spec.kind == "current_gap":
                sim.register_bond(spec.site - 1)
            elif spec.kind == "moving_current":
                obs.register_moving_bond(sim, spec.site)
            elif spec.kind == "bg":
                obs.register_bg(sim, spec.function)
        return sim

    def _probes(self):
        probes = {}
        for spec in self.observables:
            if spec.kind in ("field", "field_increment"):
                probes[spec.id] = obs.FieldProbe(self.params, spec.function, spec.frame)
        return probes

    def measure(self, sim: Simulator, spec: ObsSpec, t: float, probes, initial_fields) -> float:
        P = self.params
        root = math.sqrt(P.N)
        if spec.kind == "tagged":
            return _scaled(obs.tagged_position(sim), obs.tagged_mean(P, t), spec.scale, P)
        if spec.kind == "current":
            return _scaled(obs.bond_current(sim, spec.site),
                           obs.stationary_current_mean(P, t), spec.scale, P)
        if spec.kind == "moving_current":
            return _scaled(obs.moving_bond_current(sim, spec.site),
                           obs.moving_current_mean(P, t), spec.scale, P)
        if spec.kind == "field":
            return probes[spec.id](sim.occ, t)
        if spec.kind == "field_increment":
            return probes[spec.id](sim.occ, t) - initial_fields[spec.id]
        if spec.kind == "bg":
            return obs.bg_integral(sim, spec.function, spec.b)
        if spec.kind == "tagged_gap":
            return obs.tagged_readout_gap(sim)
        if spec.kind == "current_gap":
            return obs.current_readout_gap(sim, spec.site)
        raise ExperimentError(spec.kind)  # pragma: no cover

    def check(self, sim: Simulator) -> int:
        bad = 0 if obs.conservation_holds(sim, 0) else 1
        if self.tagged:
            for n in range(-RELATION_RANGE, RELATION_RANGE + 1):
                bad += 0 if obs.tagged_current_relation_check(sim, n) else 1
        return bad

    def run_one(self, seed: int, trace=None) -> dict:
        sim = self.build_sim(seed)
        if trace is not None:
            sim.add_trace_sink(trace)
        probes = self._probes()
        initial_fields = {k: p(sim.occ, 0.0) for k, p in probes.items()}
        out = {s.id: np.empty(len(self.checkpoints)) for s in self.observables}
        violations = 0
        for j, t in enumerate(self.checkpoints):
            sim.advance_to_scaled(t)
            for spec in self.observables:
                out[spec.id][j] = self.measure(sim, spec, t, probes, initial_fields)
            if self.check_identities:
                violations += self.check(sim)
        if self.check_identities:
            sim.check_consistency()
        out["_violations"] = float(violations)
        return out

    def plan(self, replicas: int, master_seed: int) -> ReplicaPlan:
        return ReplicaPlan(replicas, master_seed, self.run_one)

    def run(self, replicas: int, master_seed: int, threads: int = 1) -> ReplicaResult:
        return run_replicas(self.plan(replicas, master_seed), threads=threads)


def _scaled(value: float, mean: float, scale: str, P: SimParams) -> float:
    if scale == "lln":
        return value / P.speed
    if scale == "clt":
        return (value - mean) / math.sqrt(P.N)
    return float(value)


def at(result: ReplicaResult, obs_id: str, checkpoint_index: int = -1) -> np.ndarray:
    """Samples of one observable at one checkpoint, in replica order."""
    return result.samples[obs_id][:, checkpoint_index]


def violations(result: ReplicaResult) -> int:
    return int(result.samples["_violations"].sum())
