"""Test functions for the density fields: Hermite functions, ramps, bumps.

Hermite(z) is the orthonormal Hermite function
h_z(u) = (2^z z! sqrt(pi))^{-1/2} H_z(u) exp(-u^2/2), evaluated with the
normalized three-term recurrence so nothing overflows for moderate z.
These satisfy <h_z, h_w> = delta_zw and (u^2 - d^2/du^2) h_z = (2z+1) h_z.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# |H(u)| below this counts as outside the numerical support
SUPPORT_TOL = 1e-14
K0_STEP = 1e-4
SIMPSON_POINTS = 2**16
HERMITE_WINDOW = 12.0


class TestFunctionError(ValueError):
    __test__ = False


class TestFunction:
    """Base class; subclasses are frozen dataclasses, hence hashable."""

    __test__ = False
    smooth = False

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = self._eval(u)
        return float(out) if out.ndim == 0 else out

    def _eval(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Interval outside which |H| < SUPPORT_TOL (may be infinite)."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Points where H or a low derivative jumps; quadrature splits there."""
        return ()


@lru_cache(maxsize=64)
def _hermite_radius(z: int) -> float:
    u = np.linspace(0.0, 60.0, 600001)
    vals = np.abs(_hermite_values(z, u))
    above = np.flatnonzero(vals >= SUPPORT_TOL)
    return float(u[above[-1]]) + 1e-3 if above.size else 0.0


def _hermite_values(z: int, u: np.ndarray) -> np.ndarray:
    prev = np.pi**-0.25 * np.exp(-0.5 * u * u)
    if z == 0:
        return prev
    cur = math.sqrt(2.0) * u * prev
    for k in range(1, z):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * u * cur - math.sqrt(k / (k + 1)) * prev
    return cur


@dataclass(frozen=True)
class Hermite(TestFunction):
    z: int
    smooth = True

    def __post_init__(self):
        if self.z < 0:
            raise TestFunctionError("Hermite index must be non-negative")

    def _eval(self, u):
        return _hermite_values(self.z, u)

    def support(self):
        r = _hermite_radius(self.z)
        return (-r, r)


@dataclass(frozen=True)
class Ramp(TestFunction):
    """G_n(u) = (1 - u/n)^+ on u >= 0, zero for u < 0."""

    n: float

    def __post_init__(self):
        if not self.n > 0:
            raise TestFunctionError("ramp length must be positive")

    def _eval(self, u):
        return np.where(u >= 0.0, np.clip(1.0 - u / self.n, 0.0, None), 0.0)

    def support(self):
        return (0.0, float(self.n))

    def breakpoints(self):
        return (0.0, float(self.n))


@dataclass(frozen=True)
class Heaviside(TestFunction):
    def _eval(self, u):
        return np.where(u >= 0.0, 1.0, 0.0)

    def support(self):
        return (0.0, math.inf)

    def breakpoints(self):
        return (0.0,)


@dataclass(frozen=True)
class Bump(TestFunction):
    """amplitude * exp(1 - 1/(1 - r^2)) for |r| < 1, r = (u - center)/width."""

    center: float = 0.0
    width: float = 1.0
    amplitude: float = 1.0
    smooth = True

    def __post_init__(self):
        if not self.width > 0:
            raise TestFunctionError("bump width must be positive")

    @classmethod
    def unit_norm(cls, center: float = 0.0, width: float = 1.0) -> "Bump":
        """Bump scaled to unit L^2 norm."""
        raw = cls(center, width, 1.0)
        return cls(center, width, 1.0 / math.sqrt(inner_product(raw, raw)))

    def _eval(self, u):
        r = (u - self.center) / self.width
        inside = np.abs(r) < 1.0
        r2 = np.where(inside, r * r, 0.0)
        return np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / (1.0 - r2)), 0.0)

    def support(self):
        return (self.center - self.width, self.center + self.width)


@dataclass(frozen=True)
class Tabulated(TestFunction):
    """Piecewise-linear interpolation of (grid, values); zero outside the grid."""

    grid: tuple
    values: tuple

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size < 2 or len(self.values) != g.size:
            raise TestFunctionError("tabulated function needs >= 2 matching points")
        if np.any(np.diff(g) <= 0):
            raise TestFunctionError("tabulated grid must be strictly increasing")

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        grid, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    u, val = float(row[0]), float(row[1])
                except ValueError:
                    if not grid:  # header line
                        continue
                    raise TestFunctionError(f"bad row in {path}: {row}")
                grid.append(u)
                values.append(val)
        return cls(tuple(grid), tuple(values))

    def _eval(self, u):
        g = np.asarray(self.grid)
        return np.interp(u, g, np.asarray(self.values), left=0.0, right=0.0)

    def support(self):
        return (float(self.grid[0]), float(self.grid[-1]))

    def breakpoints(self):
        return tuple(float(x) for x in self.grid)


def evaluate(H: TestFunction, u):
    return H(u)


def _simpson(f, a, b, n):
    if n % 2:
        n += 1
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def _ramp_product(n, m):
    a = min(n, m)
    return a - 0.5 * a * a * (1.0 / n + 1.0 / m) + a**3 / (3.0 * n * m)


def inner_product(H: TestFunction, G: TestFunction) -> float:
    """Integral of H*G over the real line.

    Ramp/Heaviside pairs use closed forms. Otherwise composite Simpson with
    2^16 intervals over the intersection of the numerical supports (clipped to
    [-12, 12] for Hermite pairs), split at each function's breakpoints.
    """
    pair = {type(H), type(G)}
    if pair <= {Ramp, Heaviside}:
        if isinstance(H, Heaviside) and isinstance(G, Heaviside):
            raise TestFunctionError("divergent inner product: neither function decays")
        if isinstance(H, Ramp) and isinstance(G, Ramp):
            return _ramp_product(H.n, G.n)
        return (H.n if isinstance(H, Ramp) else G.n) / 2.0
    lo = max(H.support()[0], G.support()[0])
    hi = min(H.support()[1], G.support()[1])
    if isinstance(H, Hermite) and isinstance(G, Hermite):
        lo, hi = max(lo, -HERMITE_WINDOW), min(hi, HERMITE_WINDOW)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise TestFunctionError("divergent inner product: no finite common support")
    if hi <= lo:
        return 0.0
    cuts = sorted({lo, hi, *(b for b in H.breakpoints() + G.breakpoints() if lo < b < hi)})
    total = 0.0
    span = hi - lo
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(64, int(SIMPSON_POINTS * (b - a) / span))
        total += _simpson(lambda x: H(x) * G(x), a, b, n)
    return float(total)


def apply_K0(H: TestFunction, u):
    """(u^2 - d^2/du^2) H at u; second derivative by central difference, h = 1e-4."""
    if not H.smooth:
        raise TestFunctionError(f"{type(H).__name__} is not twice differentiable")
    u = np.asarray(u, dtype=np.float64)
    h = K0_STEP
    second = (H(u + h) - 2.0 * H(u) + H(u - h)) / (h * h)
    out = u * u * H(u) - second
    return float(out) if np.ndim(out) == 0 else out


def parse_function(text: str) -> TestFunction:
    """Parse ``hermite:z``, ``ramp:n``, ``heaviside``, ``bump:center,width[,unit]``
    or ``csv:path``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.strip().lower()
    args = [a.strip() for a in arg.split(",")] if arg else []
    try:
        if kind == "hermite":
            return Hermite(int(args[0]))
        if kind == "ramp":
            return Ramp(float(args[0]))
        if kind == "heaviside":
            return Heaviside()
        if kind == "bump":
            center = float(args[0]) if args else 0.0
            width = float(args[1]) if len(args) > 1 else 1.0
            if len(args) > 2 and args[2] == "unit":
                return Bump.unit_norm(center, width)
            amp = float(args[2]) if len(args) > 2 else 1.0
            return Bump(center, width, amp)
        if kind == "csv":
            return Tabulated.from_csv(arg.strip())
    except (IndexError, ValueError) as exc:
        raise TestFunctionError(f"cannot parse test function {text!r}: {exc}") from None
    raise TestFunctionError(f"unknown test function kind {kind!r}")
