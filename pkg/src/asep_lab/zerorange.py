"""Exclusion <-> zero-range (queue) mapping and a zero-range simulator.

Particles are labelled from the tagged one (label 0) clockwise; queue i is
the number of holes between particle i and particle i+1. An exclusion jump
of particle i to the right moves one customer from queue i to queue i-1 and
a jump to the left moves one from queue i-1 to queue i. In queue language a
customer moves left at rate p and right at rate q whenever its queue is
nonempty.

Orientation of the boundary counters: N_minus counts customers leaving
queue 0 leftward (the tagged particle stepped right), N_plus counts
customers entering queue 0 from queue -1 (it stepped left), so the tagged
displacement is X = N_minus - N_plus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .lattice import Configuration
from .rng import next_exponential, next_index_and_low, seed_state, threshold32


class ZeroRangeError(ValueError):
    pass


@dataclass
class QueueConfig:
    queues: np.ndarray

    def __post_init__(self):
        self.queues = np.ascontiguousarray(self.queues, dtype=np.int64)
        if self.queues.ndim != 1 or self.queues.size == 0:
            raise ZeroRangeError("need at least one queue")
        if np.any(self.queues < 0):
            raise ZeroRangeError("queue lengths must be non-negative")

    @property
    def particles(self) -> int:
        return int(self.queues.size)

    @property
    def ring_size(self) -> int:
        return int(self.queues.sum()) + self.particles


def exclusion_to_zr(config: Configuration) -> QueueConfig:
    pos = np.flatnonzero(config.occupancy)
    if pos.size == 0:
        raise ZeroRangeError("configuration has no particles")
    if config.tagged is None:
        raise ZeroRangeError("configuration has no tagged particle")
    start = int(np.searchsorted(pos, config.tagged))
    ordered = np.roll(pos, -start)
    nxt = np.roll(ordered, -1)
    gaps = (nxt - ordered - 1) % config.L
    if pos.size == 1:
        gaps[0] = config.L - 1
    return QueueConfig(gaps)


def zr_to_exclusion(queues: QueueConfig, origin: int, L: int) -> Configuration:
    if queues.ring_size != L:
        raise ZeroRangeError(
            f"queues + particles = {queues.ring_size} does not match L={L}")
    steps = np.concatenate(([0], queues.queues[:-1] + 1))
    sites = (origin + np.cumsum(steps)) % L
    occ = np.zeros(L, dtype=np.uint8)
    occ[sites] = 1
    return Configuration(occ, tagged=origin % L)


@nb.njit(cache=True, nogil=True)
def _zr_run(t_end, times, queues, nonempty, where, counts, rng, p_thresh):
    # counts = [m (nonempty queues), n_minus, n_plus, attempts]
    n = queues.shape[0]
    t_now = times[0]
    t_next = times[1]
    while t_next <= t_end:
        t_now = t_next
        m = counts[0]
        j, low = next_index_and_low(rng, m)
        i = nonempty[j]
        if low < p_thresh:
            k = i - 1 if i > 0 else n - 1
            if i == 0:
                counts[1] += 1
        else:
            k = i + 1 if i + 1 < n else 0
            if i == n - 1:
                counts[2] += 1
        counts[3] += 1
        queues[i] -= 1
        if queues[i] == 0:
            last = nonempty[m - 1]
            nonempty[j] = last
            where[last] = j
            where[i] = -1
            m -= 1
        if queues[k] == 0:
            nonempty[m] = k
            where[k] = m
            m += 1
        queues[k] += 1
        counts[0] = m
        t_next = t_now + next_exponential(rng, m) if m > 0 else np.inf
    times[0] = t_end
    times[1] = t_next


class ZeroRangeSimulator:
    """Thinned KMC for the queue process; global rate = number of nonempty queues.

    Since the number of nonempty queues changes, the pending event time is
    redrawn after each event from the new rate (memorylessness).
    """

    def __init__(self, queues: QueueConfig, p: float, seed: int, track_boundary: bool = True):
        if not 0.0 < p <= 1.0:
            raise ZeroRangeError(f"p={p} outside (0,1]")
        self.p = p
        self.initial = QueueConfig(queues.queues.copy())
        self.queues = queues.queues.copy()
        n = self.queues.size
        self.nonempty = np.zeros(n, dtype=np.int64)
        self.where = np.full(n, -1, dtype=np.int64)
        nz = np.flatnonzero(self.queues)
        self.nonempty[: nz.size] = nz
        self.where[nz] = np.arange(nz.size)
        self.counts = np.array([nz.size, 0, 0, 0], dtype=np.int64)
        self.rng = seed_state(seed)
        self.p_thresh = threshold32(p)
        first = next_exponential(self.rng, nz.size) if nz.size else math.inf
        self.times = np.array([0.0, first])
        self.track_boundary = track_boundary

    @property
    def phys_time(self) -> float:
        return float(self.times[0])

    def advance(self, tau: float) -> None:
        if tau < self.times[0]:
            raise ZeroRangeError(f"cannot advance to {tau} < {self.times[0]}")
        _zr_run(float(tau), self.times, self.queues, self.nonempty, self.where,
                self.counts, self.rng, self.p_thresh)

    def queue_config(self) -> QueueConfig:
        return QueueConfig(self.queues.copy())

    def displacement(self) -> int:
        if not self.track_boundary:
            raise ZeroRangeError("boundary counters not registered")
        return int(self.counts[1] - self.counts[2])


def zr_tagged_displacement(zr_sim: ZeroRangeSimulator, t: float) -> int:
    """Advance to physical time t and return N_minus - N_plus."""
    if not zr_sim.track_boundary:
        raise ZeroRangeError("boundary counters not registered")
    zr_sim.advance(t)
    return zr_sim.displacement()


def sample_geometric_queues(n: int, alpha: float, seed: int) -> QueueConfig:
    """n i.i.d. queues with P(k) = alpha (1-alpha)^k."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return QueueConfig(rng.geometric(alpha, size=n) - 1)
