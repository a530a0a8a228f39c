"""Thinned kinetic Monte Carlo for the ASEP on a ring.

Every particle attempts a jump at total rate p + q = 1, so the global attempt
rate is the (conserved) particle count. An attempt picks a particle uniformly,
goes right with probability p and left otherwise, and executes iff the target
is empty. Executed transitions therefore occur at exactly c(x, y, eta).

The hot loop is a single numba kernel. Observables with a fixed shape (bond
currents, moving bonds, the tagged particle, quadratic-field integrals) are
updated in the kernel; arbitrary Python observers see ``EventRecord``s through
the trace buffer, which is slow and meant for debugging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numba as nb
import numpy as np

from .lattice import Configuration, ParameterError, SimParams, check_params
from .rng import next_exponential, next_index_and_low, seed_state, threshold32

TRACE_DTYPE = np.dtype([("time", "<f8"), ("site", "<i4"), ("flags", "u1")])
FLAG_EXECUTED = 1
FLAG_RIGHT = 2

_TIME_EPS = 1e-12


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EventRecord:
    time: float
    site: int
    direction: str
    executed: bool
    dt: float


@nb.njit(cache=True, inline="always")
def _pair_terms(occ, w, g, alpha, a, b, c, d):
    # the three terms of sum_x w[g, x] eta_bar(x) eta_bar(x+1) touching bond
    # [b, c]; a, b, c, d are consecutive ring sites
    ea = occ[a] - alpha
    eb = occ[b] - alpha
    ec = occ[c] - alpha
    ed = occ[d] - alpha
    return w[g, a] * ea * eb + w[g, b] * eb * ec + w[g, c] * ec * ed


@nb.njit(cache=True)
def _full_s(occ, w, alpha, L):
    acc = 0.0
    for x in range(L):
        acc += w[x] * (occ[x] - alpha) * (occ[(x + 1) % L] - alpha)
    return acc


@nb.njit(cache=True)
def _sweep_moving(t_limit, occ, L, mb_site, mb_count, mb_dir, mb_step, mb_k, mb_offset):
    # process every offset change with threshold time <= t_limit
    for j in range(mb_site.shape[0]):
        d = mb_dir[j]
        if d == 0:
            continue
        while True:
            # v > 0: offset steps up at tau = k/v; v < 0: floor(v*tau) steps
            # down just after tau = k/|v| (k = 0, 1, ...)
            t_thr = mb_k[j] * mb_step[j]
            if t_thr > t_limit or (d < 0 and t_thr == t_limit):
                break
            if d > 0:
                new_left = (mb_site[j] + 1) % L
                mb_count[j] -= occ[new_left]
                mb_site[j] = new_left
                mb_offset[j] += 1
            else:
                mb_count[j] += occ[mb_site[j]]
                mb_site[j] = (mb_site[j] - 1) % L
                mb_offset[j] -= 1
            mb_k[j] += 1


@nb.njit(cache=True, nogil=True)
def _kmc_run(t_end, times, occ, pos, rng, p_thresh, alpha, ints,
             bond_map, bond_counts,
             mb_site, mb_count, mb_dir, mb_step, mb_k, mb_offset,
             bg_w, bg_s, bg_int, bg_mask,
             tr_time, tr_site, tr_flags, tr_dt, tr_len):
    """Run events until physical time t_end.

    times = [t_now, t_next]; ints = [tag_index, tag_disp, attempts, executed].
    Returns 0 when t_end is reached, 1 when the trace buffer filled up.
    """
    L = occ.shape[0]
    n = pos.shape[0]
    n_bg = bg_s.shape[0]
    cap = tr_time.shape[0]
    tag = ints[0]
    t_now = times[0]
    t_next = times[1]
    while True:
        if t_next > t_end:
            dt = t_end - t_now
            for g in range(n_bg):
                bg_int[g] += bg_s[g] * dt
            _sweep_moving(t_end, occ, L, mb_site, mb_count, mb_dir, mb_step, mb_k, mb_offset)
            times[0] = t_end
            times[1] = t_next
            return 0
        _sweep_moving(t_next, occ, L, mb_site, mb_count, mb_dir, mb_step, mb_k, mb_offset)
        dt = t_next - t_now
        for g in range(n_bg):
            bg_int[g] += bg_s[g] * dt
        t_now = t_next

        i, low = next_index_and_low(rng, n)
        right = low < p_thresh
        x = pos[i]
        if right:
            y = x + 1
            if y == L:
                y = 0
        else:
            y = x - 1
            if y < 0:
                y = L - 1
        executed = occ[y] == 0
        ints[2] += 1
        if executed:
            ints[3] += 1
            c = x if right else y  # jump crosses bond [c, c+1]
            if n_bg > 0 and bg_mask[c]:
                if L >= 4:
                    sa = c - 1 if c > 0 else L - 1
                    sc = c + 1 if c + 1 < L else 0
                    sd = sc + 1 if sc + 1 < L else 0
                    for g in range(n_bg):
                        bg_s[g] -= _pair_terms(occ, bg_w, g, alpha, sa, c, sc, sd)
                occ[x] = 0
                occ[y] = 1
                if L >= 4:
                    for g in range(n_bg):
                        bg_s[g] += _pair_terms(occ, bg_w, g, alpha, sa, c, sc, sd)
                else:
                    for g in range(n_bg):
                        bg_s[g] = _full_s(occ, bg_w[g], alpha, L)
            else:
                occ[x] = 0
                occ[y] = 1
            pos[i] = y
            slot = bond_map[c]
            if slot >= 0:
                bond_counts[slot] += 1 if right else -1
            for j in range(mb_site.shape[0]):
                if mb_site[j] == c:
                    mb_count[j] += 1 if right else -1
            if i == tag:
                ints[1] += 1 if right else -1

        t_next = t_now + next_exponential(rng, n)

        if cap > 0:
            k = tr_len[0]
            tr_time[k] = t_now
            tr_site[k] = x
            tr_flags[k] = (1 if executed else 0) | (2 if right else 0)
            tr_dt[k] = dt
            tr_len[0] = k + 1
            if k + 1 == cap:
                times[0] = t_now
                times[1] = t_next
                return 1


class Simulator:
    """A configuration, its event clock, RNG state and registered accumulators.

    Physical time ``phys_time`` is the unscaled process time; ``time`` is the
    macroscopic time phys_time / params.speed. With ``ring_only=True`` the
    ring is the system of interest (oracle comparisons on tiny rings), so the
    wrap-around margin L >= 4 * horizon is not enforced.
    """

    def __init__(self, params: SimParams, config: Configuration, seed: int,
                 ring_only: bool = False):
        check_params(params, margin=not ring_only)
        if config.L != params.L:
            raise ParameterError(f"configuration length {config.L} != L={params.L}")
        self.params = params
        self.initial = config.copy()
        self.occ = config.occupancy.copy()
        self.pos = np.flatnonzero(self.occ).astype(np.int64)
        self.rng = seed_state(seed)
        self.p_thresh = threshold32(params.p)
        n = self.pos.size
        self.ints = np.zeros(4, dtype=np.int64)
        self.ints[0] = -1
        self.tagged_origin: Optional[int] = None
        if config.tagged is not None:
            self.ints[0] = int(np.searchsorted(self.pos, config.tagged))
            self.tagged_origin = config.tagged + config.winding * params.L
        first = next_exponential(self.rng, n) if n > 0 else math.inf
        self.times = np.array([0.0, first], dtype=np.float64)

        self.bond_map = np.full(params.L, -1, dtype=np.int64)
        self.bond_counts = np.zeros(0, dtype=np.int64)
        self._bond_sites: dict[int, int] = {}

        self._mb: dict[int, int] = {}
        self.mb_site = np.zeros(0, dtype=np.int64)
        self.mb_count = np.zeros(0, dtype=np.int64)
        self.mb_dir = np.zeros(0, dtype=np.int64)
        self.mb_step = np.zeros(0, dtype=np.float64)
        self.mb_k = np.zeros(0, dtype=np.int64)
        self.mb_offset = np.zeros(0, dtype=np.int64)

        self._bg: dict = {}
        self.bg_w = np.zeros((0, params.L), dtype=np.float64)
        self.bg_s = np.zeros(0, dtype=np.float64)
        self.bg_int = np.zeros(0, dtype=np.float64)
        # bg_mask[c] = 1 iff some weight touching bond [c, c+1]'s terms is nonzero
        self.bg_mask = np.zeros(params.L, dtype=np.uint8)

        self.observers: list[Callable[[EventRecord], None]] = []
        self._trace_sinks: list = []
        self._trace_cap = 0

    # -- state -----------------------------------------------------------
    @property
    def phys_time(self) -> float:
        return float(self.times[0])

    @property
    def time(self) -> float:
        return self.phys_time / self.params.speed

    @property
    def particle_count(self) -> int:
        return int(self.pos.size)

    @property
    def total_rate(self) -> float:
        """Total attempt rate; equals the particle count since p + q = 1."""
        return float(self.pos.size)

    @property
    def attempts(self) -> int:
        return int(self.ints[2])

    @property
    def executed(self) -> int:
        return int(self.ints[3])

    def configuration(self) -> Configuration:
        tagged = None
        winding = 0
        if self.ints[0] >= 0:
            lifted = self.tagged_origin + self.tagged_displacement()
            tagged = lifted % self.params.L
            winding = lifted // self.params.L
        return Configuration(self.occ.copy(), tagged, int(winding))

    def tagged_displacement(self) -> int:
        if self.ints[0] < 0:
            raise SimulationError("no tagged particle")
        return int(self.ints[1])

    # -- registration ----------------------------------------------------
    def _require_fresh(self, what):
        if self.times[0] != 0.0 or self.ints[2] != 0:
            raise SimulationError(f"{what} must be registered before advancing")

    def register_bond(self, x: int) -> None:
        """Track the current through bond [x, x+1]."""
        self._require_fresh("bond")
        idx = int(x) % self.params.L
        if idx in self._bond_sites:
            return
        self._bond_sites[idx] = self.bond_counts.size
        self.bond_map[idx] = self.bond_counts.size
        self.bond_counts = np.append(self.bond_counts, np.int64(0))

    def bond_count(self, x: int) -> int:
        idx = int(x) % self.params.L
        if idx not in self._bond_sites:
            raise SimulationError(f"bond [{x},{x + 1}] not registered")
        return int(self.bond_counts[self._bond_sites[idx]])

    def register_moving_bond(self, x: int) -> None:
        """Track the current through [y_s, y_s + 1], y_s = x + floor(v * tau)."""
        self._require_fresh("moving bond")
        key = int(x)
        if key in self._mb:
            return
        v = self.params.v
        self._mb[key] = self.mb_site.size
        self.mb_site = np.append(self.mb_site, np.int64(key % self.params.L))
        self.mb_count = np.append(self.mb_count, np.int64(0))
        self.mb_dir = np.append(self.mb_dir, np.int64(0 if v == 0 else (1 if v > 0 else -1)))
        self.mb_step = np.append(self.mb_step, 0.0 if v == 0 else 1.0 / abs(v))
        self.mb_k = np.append(self.mb_k, np.int64(1 if v > 0 else 0))
        self.mb_offset = np.append(self.mb_offset, np.int64(0))

    def moving_bond(self, x: int) -> tuple[int, int]:
        """(count, offset) of the moving bond anchored at x."""
        key = int(x)
        if key not in self._mb:
            raise SimulationError(f"moving bond at {x} not registered")
        j = self._mb[key]
        return int(self.mb_count[j]), int(self.mb_offset[j])

    def register_quadratic(self, key, weights: np.ndarray) -> None:
        """Accumulate the time integral of S = sum_x w[x] eta_bar(x) eta_bar(x+1)."""
        self._require_fresh("quadratic accumulator")
        if key in self._bg:
            return
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if w.shape != (self.params.L,):
            raise ValueError("weights must have one entry per ring site")
        self._bg[key] = self.bg_s.size
        self.bg_w = np.vstack([self.bg_w, w[None, :]])
        self.bg_s = np.append(self.bg_s, _full_s(self.occ, w, self.params.alpha, self.params.L))
        self.bg_int = np.append(self.bg_int, 0.0)
        nz = w != 0.0
        touched = nz | np.roll(nz, 1) | np.roll(nz, -1)
        self.bg_mask |= touched.astype(np.uint8)

    def quadratic(self, key) -> tuple[float, float]:
        """(current S, physical-time integral of S) for a registered accumulator."""
        if key not in self._bg:
            raise SimulationError(f"quadratic accumulator {key!r} not registered")
        g = self._bg[key]
        return float(self.bg_s[g]), float(self.bg_int[g])

    def add_observer(self, fn: Callable[[EventRecord], None]) -> None:
        """Deliver every EventRecord (executed or suppressed) to ``fn``."""
        self.observers.append(fn)
        self._trace_cap = max(self._trace_cap, 4096)

    def add_trace_sink(self, fh) -> None:
        """Write every event as a packed 13-byte record (f8 time, i4 site, u1 flags)."""
        self._trace_sinks.append(fh)
        self._trace_cap = max(self._trace_cap, 1 << 16)

    # -- dynamics --------------------------------------------------------
    def advance_phys(self, tau: float) -> None:
        if tau < self.times[0] - _TIME_EPS:
            raise SimulationError(f"cannot advance to {tau} < current time {self.times[0]}")
        if tau > self.params.horizon * (1 + 1e-12):
            raise SimulationError(
                f"time {tau:g} beyond validated horizon {self.params.horizon:g}")
        tau = max(tau, float(self.times[0]))
        cap = self._trace_cap
        tr_time = np.empty(cap, dtype=np.float64)
        tr_site = np.empty(cap, dtype=np.int32)
        tr_flags = np.empty(cap, dtype=np.uint8)
        tr_dt = np.empty(cap, dtype=np.float64)
        tr_len = np.zeros(1, dtype=np.int64)
        while True:
            tr_len[0] = 0
            status = _kmc_run(tau, self.times, self.occ, self.pos, self.rng, self.p_thresh,
                              self.params.alpha, self.ints, self.bond_map, self.bond_counts,
                              self.mb_site, self.mb_count, self.mb_dir, self.mb_step,
                              self.mb_k, self.mb_offset, self.bg_w, self.bg_s, self.bg_int,
                              self.bg_mask, tr_time, tr_site, tr_flags, tr_dt, tr_len)
            if cap:
                self._flush(tr_time, tr_site, tr_flags, tr_dt, int(tr_len[0]))
            if status == 0:
                return

    def advance_to_scaled(self, t: float) -> None:
        """Run until macroscopic time t (physical time t * params.speed)."""
        if t < self.time - _TIME_EPS:
            raise SimulationError(f"cannot advance to t={t} < current t={self.time}")
        if t > self.params.t_max * (1 + 1e-12):
            raise SimulationError(f"t={t} beyond validated t_max={self.params.t_max}")
        self.advance_phys(t * self.params.speed)

    def _flush(self, tr_time, tr_site, tr_flags, tr_dt, k):
        if k == 0:
            return
        if self._trace_sinks:
            rec = np.empty(k, dtype=TRACE_DTYPE)
            rec["time"] = tr_time[:k]
            rec["site"] = tr_site[:k]
            rec["flags"] = tr_flags[:k]
            data = rec.tobytes()
            for fh in self._trace_sinks:
                fh.write(data)
        for j in range(k):
            flags = int(tr_flags[j])
            ev = EventRecord(float(tr_time[j]), int(tr_site[j]),
                             "right" if flags & FLAG_RIGHT else "left",
                             bool(flags & FLAG_EXECUTED), float(tr_dt[j]))
            for fn in self.observers:
                fn(ev)

    # -- debug checks ----------------------------------------------------
    def check_consistency(self) -> None:
        """Full rescan of derived state; raises SimulationError on mismatch."""
        occ_pos = np.flatnonzero(self.occ)
        if not np.array_equal(np.sort(self.pos), occ_pos):
            raise SimulationError("particle index inconsistent with occupancy")
        if occ_pos.size != self.initial.particle_count:
            raise SimulationError("particle number not conserved")
        for key, g in self._bg.items():
            full = _full_s(self.occ, self.bg_w[g], self.params.alpha, self.params.L)
            scale = max(1.0, float(np.abs(self.bg_w[g]).sum()))
            if abs(full - self.bg_s[g]) > 1e-9 * scale:
                raise SimulationError(f"incremental S drifted for {key!r}: "
                                      f"{self.bg_s[g]} vs {full}")


def make_sim(params: SimParams, config: Configuration, seed: int,
             ring_only: bool = False) -> Simulator:
    return Simulator(params, config, seed, ring_only)


def read_trace(path) -> np.ndarray:
    """Load a binary event trace written by ``Simulator.add_trace_sink``."""
    return np.fromfile(path, dtype=TRACE_DTYPE)
