"""Problem parameters, radial grids, explicit profiles and CSV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, roots_legendre


class InvalidInput(ValueError):
    """Raised for parameter combinations outside the admissible ranges."""


class NumericalFailure(RuntimeError):
    """Raised when a solver cannot reach its tolerance."""


def sphere_area(n):
    """|S^{n-1}|, the surface of the unit sphere in R^n (n may be real)."""
    return 2.0 * math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n))


@dataclass(frozen=True)
class ProblemParams:
    """Dimension d, weight dimension n (defaults to d), exponents and mass.

    Either m or p may be given; if both are given they must satisfy
    p = 1/(2m-1).
    """
    d: int
    m: Optional[float] = None
    p: Optional[float] = None
    n: Optional[float] = None
    mass: float = 1.0

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise InvalidInput(f"d must be a positive integer, got {self.d!r}")
        if self.n is None:
            object.__setattr__(self, "n", float(self.d))
        if not self.n >= self.d:
            raise InvalidInput(f"weight dimension n={self.n} must be >= d={self.d}")
        if self.m is not None and not (0.0 < self.m < 1.0):
            raise InvalidInput(f"m must lie in (0,1), got {self.m}")
        if self.p is not None and not self.p > 1.0:
            raise InvalidInput(f"p must exceed 1, got {self.p}")
        if self.m is not None and self.p is not None:
            if self.m <= 0.5 or abs(self.p - 1.0 / (2 * self.m - 1)) > 1e-12 * self.p:
                raise InvalidInput("m and p are inconsistent (need p = 1/(2m-1))")
        if not self.mass > 0:
            raise InvalidInput(f"mass must be positive, got {self.mass}")

    @property
    def m1(self):
        return (self.d - 1.0) / self.d

    @property
    def mc(self):
        return (self.d - 2.0) / self.d

    @property
    def p_star(self):
        # d/(d-2) is only finite for d >= 3
        return self.d / (self.d - 2.0) if self.d > 2 else math.inf

    @property
    def p_from_m(self):
        if self.m is None or self.m <= 0.5:
            raise InvalidInput("p = 1/(2m-1) needs m > 1/2")
        return 1.0 / (2 * self.m - 1)

    @property
    def m_from_p(self):
        if self.p is None:
            raise InvalidInput("p is not set")
        return (self.p + 1) / (2 * self.p)

    def exponent_m(self):
        if self.m is not None:
            return self.m
        return self.m_from_p

    def exponent_p(self):
        if self.p is not None:
            return self.p
        return self.p_from_m

    def require_fast_diffusion(self):
        """Check m in [m1, 1), and m > 1/2 when d is 1 or 2."""
        m = self.exponent_m()
        if m < self.m1 - 1e-15 or m >= 1:
            raise InvalidInput(f"m={m} outside [m1, 1) = [{self.m1}, 1)")
        if self.d <= 2 and m <= 0.5:
            raise InvalidInput("d in {1,2} requires m > 1/2")
        return m


@dataclass(frozen=True)
class CknParams:
    """Weights |x|^{-2a}, |x|^{-bp} with exponent p fixed by (d, a, b)."""
    d: int
    a: float
    b: float

    def __post_init__(self):
        if self.d < 2:
            raise InvalidInput("CKN parameters need d >= 2")
        if not self.a < self.a_c:
            raise InvalidInput(f"a={self.a} must be below a_c={self.a_c}")
        if not (self.a <= self.b <= self.a + 1):
            raise InvalidInput(f"need a <= b <= a+1, got a={self.a}, b={self.b}")
        if self.d == 2 and self.b in (self.a, self.a + 1):
            raise InvalidInput("d = 2 needs a < b < a+1")

    @property
    def a_c(self):
        return (self.d - 2) / 2.0

    @property
    def p(self):
        return 2.0 * self.d / (self.d - 2 + 2 * (self.b - self.a))


class RadialGrid:
    """Radial nodes on [0, R_max] with product-trapezoid weights.

    The weights integrate piecewise linear interpolants against r^{n-1} dr
    exactly, so constants are integrated to rounding error.
    """

    def __init__(self, nodes):
        r = np.asarray(nodes, dtype=float)
        if r.ndim != 1 or r.size < 3:
            raise InvalidInput("a radial grid needs at least 3 nodes")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise InvalidInput("nodes must start at 0 and increase strictly")
        r.setflags(write=False)
        self.r = r
        self._w = {}

    def __len__(self):
        return self.r.size

    @property
    def r_max(self):
        return float(self.r[-1])

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and (
            other is self or np.array_equal(other.r, self.r))

    def __hash__(self):
        return hash((self.r.size, self.r_max))

    def radial_weights(self, n):
        """Weights for int_0^R f(r) r^{n-1} dr (no sphere factor)."""
        key = float(n)
        if key not in self._w:
            self._w[key] = _product_trapezoid(self.r, key)
        return self._w[key]

    def weights(self, n):
        """Weights for the integral over the ball of radius R in R^n."""
        return sphere_area(n) * self.radial_weights(n)

    def integrate(self, f, n):
        return float(np.dot(self.weights(n), f))

    def derivative(self, f):
        """First derivative, second order; even reflection at r=0."""
        return _nonuniform_derivs(self.r, np.asarray(f, float))[0]

    def derivatives(self, f):
        """First and second derivative, second order on graded grids."""
        return _nonuniform_derivs(self.r, np.asarray(f, float))


_GL_X, _GL_W = roots_legendre(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _product_trapezoid(r, n):
    h = np.diff(r)
    w = np.zeros_like(r)
    # first element touches the origin: closed form handles r^{n-1} singularity
    h0 = h[0]
    w[0] += h0 ** n / (n * (n + 1))
    w[1] += h0 ** n / (n + 1)
    a = r[1:-1][:, None]
    hh = h[1:][:, None]
    s = _GL_X[None, :]
    dens = (a + hh * s) ** (n - 1) * hh * _GL_W[None, :]
    w[1:-1] += np.sum(dens * (1 - s), axis=1)
    w[2:] += np.sum(dens * s, axis=1)
    return w


def _nonuniform_derivs(r, f):
    n = r.size
    d1 = np.empty(n)
    d2 = np.empty(n)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    fm, f0, fp = f[:-2], f[1:-1], f[2:]
    d1[1:-1] = (-hp / (hm * (hm + hp)) * fm + (hp - hm) / (hm * hp) * f0
                + hm / (hp * (hm + hp)) * fp)
    d2[1:-1] = 2 * (fm / (hm * (hm + hp)) - f0 / (hm * hp) + fp / (hp * (hm + hp)))
    # radial symmetry at the origin
    d1[0] = 0.0
    d2[0] = 2 * (f[1] - f[0]) / r[1] ** 2
    # one-sided closure at R_max
    h1 = r[-1] - r[-2]
    h2 = r[-2] - r[-3]
    d1[-1] = ((2 * h1 + h2) / (h1 * (h1 + h2)) * f[-1] - (h1 + h2) / (h1 * h2) * f[-2]
              + h1 / (h2 * (h1 + h2)) * f[-3])
    d2[-1] = d2[-2]
    return d1, d2


def make_grid(n_nodes: int, r_max: float, stretch: float = 1.0) -> RadialGrid:
    """Graded grid on [0, r_max].

    Uses the algebraic map s -> s^a / (s^a + (1-s)^a), which clusters nodes
    near both ends for a > 1 and is the identity for a = 1.
    """
    if n_nodes < 3:
        raise InvalidInput("n_nodes must be at least 3")
    if not r_max > 0:
        raise InvalidInput("r_max must be positive")
    if not stretch >= 1:
        raise InvalidInput("stretch must be >= 1")
    s = np.linspace(0.0, 1.0, n_nodes)
    if stretch == 1:
        phi = s
    else:
        sa = s ** stretch
        phi = sa / (sa + (1 - s) ** stretch)
    r = r_max * phi
    r[0], r[-1] = 0.0, r_max
    return RadialGrid(r)


@dataclass
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray
    n: float = field(default=3.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.r.shape:
            raise InvalidInput("values and grid have different lengths")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInput("profile contains non-finite values")

    @property
    def r(self):
        return self.grid.r

    def integral(self, f=None):
        v = self.values if f is None else f
        return self.grid.integrate(v, self.n)

    def mass(self):
        return self.integral()

    def _check(self, other):
        if not isinstance(other, RadialProfile):
            return other
        if other.grid != self.grid or other.n != self.n:
            raise InvalidInput("profiles live on different grids")
        return other.values

    def __add__(self, other):
        return RadialProfile(self.grid, self.values + self._check(other), self.n)

    def __sub__(self, other):
        return RadialProfile(self.grid, self.values - self._check(other), self.n)

    def __mul__(self, other):
        return RadialProfile(self.grid, self.values * self._check(other), self.n)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RadialProfile(self.grid, self.values / self._check(other), self.n)

    def __pow__(self, q):
        return RadialProfile(self.grid, self.values ** q, self.n)

    def with_values(self, values):
        return RadialProfile(self.grid, values, self.n)


def barenblatt(params: ProblemParams, grid: RadialGrid, mass=None) -> RadialProfile:
    """Stationary profile (C + r^2)^{1/(m-1)} of the rescaled flow.

    Without `mass` C = 1. With `mass`, C is chosen so that the grid integral
    equals the requested mass; the result stays a stationary solution.
    """
    m = params.exponent_m()
    n = params.n
    k = 1.0 / (m - 1.0)
    r2 = grid.r ** 2
    if mass is None:
        return RadialProfile(grid, (1.0 + r2) ** k, n)
    if not mass > 0:
        raise InvalidInput("mass must be positive")
    w = grid.weights(n)

    def total(logc):
        return np.log(np.dot(w, (np.exp(logc) + r2) ** k)) - np.log(mass)

    from scipy.optimize import brentq
    lo, hi = -40.0, 40.0
    if total(lo) * total(hi) > 0:
        raise InvalidInput(f"mass {mass} not reachable on this grid")
    logc = brentq(total, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=300)
    return RadialProfile(grid, (np.exp(logc) + r2) ** k, n)


def aubin_talenti(params, grid: RadialGrid, family: str = "gns",
                  n=None) -> RadialProfile:
    """Explicit optimizers: 'sobolev', 'gns' (ProblemParams) or 'ckn' (CknParams)."""
    r = grid.r
    if family == "ckn":
        if not isinstance(params, CknParams):
            raise InvalidInput("family 'ckn' needs CknParams")
        p = params.p
        q = (p - 2) * (params.a_c - params.a)
        vals = (1.0 + r ** q) ** (-2.0 / (p - 2))
        return RadialProfile(grid, vals, float(params.d if n is None else n))
    if not isinstance(params, ProblemParams):
        raise InvalidInput(f"family {family!r} needs ProblemParams")
    nn = params.n if n is None else n
    if family == "sobolev":
        if params.d < 3:
            raise InvalidInput("the Sobolev optimizer needs d >= 3")
        vals = (1.0 + r ** 2) ** (-(params.d - 2) / 2.0)
    elif family == "gns":
        p = params.exponent_p()
        vals = (1.0 + r ** 2) ** (-1.0 / (p - 1))
    else:
        raise InvalidInput(f"unknown family {family!r}")
    return RadialProfile(grid, vals, nn)


def pressure_of(u, m):
    """P = m/(m-1) u^{m-1}; u must be strictly positive."""
    if m == 1:
        raise InvalidInput("the pressure is undefined at m = 1")
    vals = u.values if isinstance(u, RadialProfile) else np.asarray(u, float)
    if np.any(vals <= 0):
        raise InvalidInput("pressure needs a strictly positive density")
    out = m / (m - 1.0) * vals ** (m - 1.0)
    if isinstance(u, RadialProfile):
        return u.with_values(out)
    return out


def fmt(x):
    """17 significant digits, the shortest text that round-trips a double."""
    return format(float(x), ".17g")


def write_profile_csv(profile: RadialProfile, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["r", "value"])
        for r, v in zip(profile.r, profile.values):
            wr.writerow([fmt(r), fmt(v)])


def read_profile_csv(path, n=3.0) -> RadialProfile:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        head = next(rd, None)
        if head is None or [h.strip() for h in head] != ["r", "value"]:
            raise InvalidInput(f"{path}: header must be 'r,value'")
        rows = []
        for i, row in enumerate(rd, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InvalidInput(f"{path}:{i}: expected 2 columns")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise InvalidInput(f"{path}:{i}: not a number") from None
    if len(rows) < 3:
        raise InvalidInput(f"{path}: too few rows")
    arr = np.array(rows)
    return RadialProfile(RadialGrid(arr[:, 0]), arr[:, 1], float(n))
