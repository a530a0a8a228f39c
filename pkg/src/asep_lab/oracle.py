"""Exact computations on tiny rings, used as ground truth for the simulator.

State s encodes a ring configuration by bits: eta(x) = (s >> x) & 1.
On a ring of L = 2 sites the two bonds [0,1] and [1,0] both join the same
pair of sites, so the move 10 <-> 01 has total rate p + q; the simulator
does the same.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

MAX_L = 12
UNIFORMIZATION_TOL = 1e-10


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class DenseGenerator:
    Q: np.ndarray
    L: int
    p: float

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]


def build_generator(L: int, p: float) -> DenseGenerator:
    if not 1 <= L <= MAX_L:
        raise OracleError(f"L={L} outside 1..{MAX_L}")
    q = 1.0 - p
    n = 1 << L
    states = np.arange(n)
    Q = np.zeros((n, n))
    for x in range(L):
        y = (x + 1) % L
        bx = (states >> x) & 1
        by = (states >> y) & 1
        swapped = states ^ ((1 << x) | (1 << y))
        right = (bx == 1) & (by == 0)
        left = (bx == 0) & (by == 1)
        np.add.at(Q, (states[right], swapped[right]), p)
        np.add.at(Q, (states[left], swapped[left]), q)
    Q[states, states] = 0.0
    Q[states, states] = -Q.sum(axis=1)
    return DenseGenerator(Q, L, p)


def occupancy_bits(L: int) -> np.ndarray:
    """Array (2^L, L) of occupancies for every state index."""
    s = np.arange(1 << L)
    return ((s[:, None] >> np.arange(L)) & 1).astype(np.uint8)


def state_index(occupancy) -> int:
    occ = np.asarray(occupancy, dtype=np.int64)
    return int(np.sum(occ << np.arange(occ.size)))


def bernoulli_measure(L: int, alpha: float) -> np.ndarray:
    k = occupancy_bits(L).sum(axis=1)
    return alpha**k * (1.0 - alpha) ** (L - k)


def stationarity_residual(gen: DenseGenerator, alpha: float) -> float:
    nu = bernoulli_measure(gen.L, alpha)
    return float(np.max(np.abs(nu @ gen.Q)))


def transient_law(gen: DenseGenerator, nu0: np.ndarray, tau: float) -> np.ndarray:
    """nu0^T exp(Q tau) by uniformization.

    With rate Lam = max exit rate and P = I + Q/Lam, the law is
    sum_k Poisson(k; Lam tau) nu0 P^k, truncated once the Poisson upper tail
    is below 1e-10 (the dropped mass bounds the total-variation error).
    """
    if tau < 0:
        raise OracleError("tau must be non-negative")
    nu0 = np.asarray(nu0, dtype=np.float64)
    lam = float(np.max(-np.diag(gen.Q)))
    if tau == 0 or lam == 0:
        return nu0.copy()
    P = np.eye(gen.dimension) + gen.Q / lam
    mu = lam * tau
    kmax = int(stats.poisson.isf(UNIFORMIZATION_TOL, mu)) + 1
    weights = stats.poisson.pmf(np.arange(kmax + 1), mu)
    v = nu0.copy()
    out = weights[0] * v
    for k in range(1, kmax + 1):
        v = v @ P
        out += weights[k] * v
    return out


def conditional_expectation_check(K: int, alpha: float) -> float:
    """Max deviation between exact and closed-form conditional block means.

    Block of K+1 sites with K internal bonds; given the block density
    rho = m/(K+1), the closed form for the per-bond mean of
    eta_bar(x) eta_bar(x+1) is (rho - alpha)^2 - rho (1 - rho) / K.
    """
    if not 2 <= K <= 16:
        raise OracleError("K must lie in 2..16")
    occ = occupancy_bits(K + 1).astype(np.float64)
    e = occ - alpha
    per_bond = (e[:, :-1] * e[:, 1:]).sum(axis=1) / K
    m = occ.sum(axis=1).astype(np.int64)
    worst = 0.0
    for total in range(K + 2):
        sel = m == total
        exact = per_bond[sel].mean()
        rho = total / (K + 1)
        formula = (rho - alpha) ** 2 - rho * (1.0 - rho) / K
        worst = max(worst, abs(exact - formula))
    return worst


def decomposition_check(p: float, alpha: float) -> float:
    """Max deviation in the instantaneous-current decomposition over (eta(0), eta(1))."""
    q = 1.0 - p
    v = (p - q) * (1.0 - 2.0 * alpha)
    mean_w = (p - q) * alpha * (1.0 - alpha)
    worst = 0.0
    for a, b in itertools.product((0, 1), repeat=2):
        w = p * a * (1 - b) - q * b * (1 - a)
        ea, eb = a - alpha, b - alpha
        rhs = -(p - q) * ea * eb - (q * (1 - alpha) + p * alpha) * (eb - ea) + v * (a - alpha)
        worst = max(worst, abs((w - mean_w) - rhs))
    return worst


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def wrapped_poisson(L: int, tau: float) -> np.ndarray:
    """Law of (N_tau mod L) for N ~ Poisson(tau)."""
    kmax = int(stats.poisson.isf(1e-15, tau)) + L
    w = stats.poisson.pmf(np.arange(kmax + 1), tau)
    out = np.zeros(L)
    np.add.at(out, np.arange(kmax + 1) % L, w)
    return out


def tv_bound(L: int, n: int) -> float:
    """Statistical allowance 4 sqrt(2^L / n) for an n-sample empirical law."""
    return 4.0 * math.sqrt((1 << L) / n)
