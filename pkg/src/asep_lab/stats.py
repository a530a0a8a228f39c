"""Mergeable moment accumulators, replica orchestration and Gaussianity checks.

Accumulators use the one-pass update and pairwise merge formulas of
Chan/Golub/LeVeque extended to third and fourth moments (Pebay 2008).
CIs are 99% normal-approximation intervals:

* mean: mean +- z sd / sqrt(n)
* variance: s^2 +- z sqrt((m4 - s^4 (n-3)/(n-1)) / n), the large-sample
  form, which stays valid for non-Gaussian samples
* covariance: jackknife (leave-one-out) standard error
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .lattice import replica_seed

CONFIDENCE = 0.99
Z99 = float(sps.norm.ppf(0.5 + CONFIDENCE / 2))


class InsufficientData(ValueError):
    pass


@dataclass
class Accumulator:
    n: int = 0
    mean: float = 0.0
    M2: float = 0.0
    M3: float = 0.0
    M4: float = 0.0

    def add(self, x: float) -> "Accumulator":
        n1 = self.n
        self.n += 1
        n = self.n
        delta = x - self.mean
        dn = delta / n
        dn2 = dn * dn
        term = delta * dn * n1
        self.mean += dn
        self.M4 += term * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * self.M2 - 4 * dn * self.M3
        self.M3 += term * dn * (n - 2) - 3 * dn * self.M2
        self.M2 += term
        return self

    def extend(self, xs) -> "Accumulator":
        for x in xs:
            self.add(float(x))
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        """Combined accumulator; neither input is modified."""
        if other.n == 0:
            return Accumulator(self.n, self.mean, self.M2, self.M3, self.M4)
        if self.n == 0:
            return Accumulator(other.n, other.mean, other.M2, other.M3, other.M4)
        na, nb = self.n, other.n
        n = na + nb
        d = other.mean - self.mean
        d2, d3, d4 = d * d, d**3, d**4
        mean = self.mean + d * nb / n
        M2 = self.M2 + other.M2 + d2 * na * nb / n
        M3 = (self.M3 + other.M3 + d3 * na * nb * (na - nb) / n**2
              + 3 * d * (na * other.M2 - nb * self.M2) / n)
        M4 = (self.M4 + other.M4
              + d4 * na * nb * (na * na - na * nb + nb * nb) / n**3
              + 6 * d2 * (na * na * other.M2 + nb * nb * self.M2) / n**2
              + 4 * d * (na * other.M3 - nb * self.M3) / n)
        return Accumulator(n, mean, M2, M3, M4)

    @property
    def variance(self) -> float:
        """Unbiased variance; NaN (undefined) when fewer than two samples."""
        return self.M2 / (self.n - 1) if self.n >= 2 else math.nan

    @property
    def second_moment(self) -> float:
        return self.M2 / self.n + self.mean**2 if self.n else math.nan


@dataclass
class PairAccumulator:
    """Running sums for two paired streams, including the co-moment C."""

    n: int = 0
    mean_x: float = 0.0
    mean_y: float = 0.0
    C: float = 0.0
    x: Accumulator = field(default_factory=Accumulator)
    y: Accumulator = field(default_factory=Accumulator)
    samples: list = field(default_factory=list)

    def add(self, a: float, b: float) -> "PairAccumulator":
        self.n += 1
        dx = a - self.mean_x
        self.mean_x += dx / self.n
        self.mean_y += (b - self.mean_y) / self.n
        self.C += dx * (b - self.mean_y)
        self.x.add(a)
        self.y.add(b)
        self.samples.append((a, b))
        return self

    def merge(self, other: "PairAccumulator") -> "PairAccumulator":
        out = PairAccumulator()
        for a, b in self.samples + other.samples:
            out.add(a, b)
        return out

    @property
    def cov(self) -> float:
        return self.C / (self.n - 1) if self.n >= 2 else math.nan


def report(acc: Accumulator) -> dict:
    """mean, var, skewness, excess kurtosis and 99% CIs for mean and variance."""
    n = acc.n
    if n < 2:
        raise InsufficientData(f"need at least 2 samples, have {n}")
    var = acc.variance
    sd = math.sqrt(var)
    half = Z99 * sd / math.sqrt(n)
    m2, m3, m4 = acc.M2 / n, acc.M3 / n, acc.M4 / n
    skew = kurt = math.nan
    if m2 > 0 and n >= 3:
        g1 = m3 / m2**1.5
        skew = g1 * math.sqrt(n * (n - 1)) / (n - 2)
    if m2 > 0 and n >= 8:
        g2 = m4 / m2**2 - 3.0
        kurt = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * g2 + 6.0)
    var_se = math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    return {
        "n": n,
        "mean": acc.mean,
        "mean_ci": (acc.mean - half, acc.mean + half),
        "var": var,
        "var_ci": (var - Z99 * var_se, var + Z99 * var_se),
        "skewness": skew,
        "kurtosis": kurt,
        "second_moment": acc.second_moment,
    }


def second_moment_ci(samples) -> tuple[float, float, float]:
    """E[X^2] estimate with a 99% normal CI."""
    sq = np.asarray(samples, dtype=np.float64) ** 2
    m = float(sq.mean())
    half = Z99 * float(sq.std(ddof=1)) / math.sqrt(sq.size) if sq.size > 1 else math.nan
    return m, m - half, m + half


def covariance(pair: PairAccumulator) -> dict:
    """Unbiased covariance with a jackknife 99% CI."""
    if pair.n < 3:
        raise InsufficientData("covariance needs at least 3 paired samples")
    xy = np.asarray(pair.samples, dtype=np.float64)
    return covariance_arrays(xy[:, 0], xy[:, 1])


def covariance_arrays(x, y) -> dict:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"count mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise InsufficientData("covariance needs at least 3 paired samples")
    sx, sy, sxy = x.sum(), y.sum(), (x * y).sum()
    cov = (sxy - sx * sy / n) / (n - 1)
    # leave-one-out replicates in O(n)
    lx, ly, lxy = sx - x, sy - y, sxy - x * y
    loo = (lxy - lx * ly / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return {"n": n, "cov": float(cov), "ci": (cov - Z99 * se, cov + Z99 * se), "se": se}


def ks_gaussian(samples) -> dict:
    """One-sample KS of the standardized samples against N(0,1)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 100:
        raise InsufficientData("KS test needs at least 100 samples")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise InsufficientData("degenerate variance")
    res = sps.kstest((x - x.mean()) / sd, "norm")
    return {"statistic": float(res.statistic), "pvalue": float(res.pvalue)}


# -- replicas ----------------------------------------------------------------

class ReplicaError(RuntimeError):
    def __init__(self, replica: int, cause: Exception):
        super().__init__(f"replica {replica}: {cause}")
        self.replica = replica
        self.cause = cause


@dataclass
class ReplicaPlan:
    """R replicas of ``experiment``; replica r runs with replica_seed(master, r).

    ``experiment(seed)`` returns a mapping observable id -> float (or a 1-d
    array with one entry per checkpoint).
    """

    replicas: int
    master_seed: int
    experiment: Callable[[int], dict]

    def seeds(self) -> list[int]:
        return [replica_seed(self.master_seed, r) for r in range(self.replicas)]


@dataclass
class ReplicaResult:
    samples: dict  # id -> array of shape (R,) or (R, k), in replica order

    def accumulators(self) -> dict:
        out = {}
        for key, arr in self.samples.items():
            if arr.ndim == 1:
                out[key] = Accumulator().extend(arr)
            else:
                out[key] = [Accumulator().extend(arr[:, j]) for j in range(arr.shape[1])]
        return out


def run_replicas(plan: ReplicaPlan, threads: int = 1,
                 progress: Optional[Callable[[int], None]] = None) -> ReplicaResult:
    """Run every replica and gather samples in canonical replica order.

    With threads > 1 replicas run concurrently (the simulation kernels release
    the GIL); results are still reduced in replica order, so output does not
    depend on the schedule.
    """
    if plan.replicas < 1:
        raise ValueError("need at least one replica")
    seeds = plan.seeds()
    if len(set(seeds)) != len(seeds):
        raise ValueError("replica seeds collide")

    def one(r):
        try:
            return plan.experiment(seeds[r])
        except Exception as exc:
            raise ReplicaError(r, exc) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(plan.replicas)))
    else:
        rows = []
        for r in range(plan.replicas):
            rows.append(one(r))
            if progress:
                progress(r)
    keys = list(rows[0])
    return ReplicaResult({k: np.array([np.asarray(row[k], dtype=np.float64) for row in rows])
                          for k in keys})


def accumulate(values: Sequence[float]) -> Accumulator:
    return Accumulator().extend(values)
