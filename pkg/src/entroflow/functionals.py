"""Entropy, Fisher information, stability and deficit functionals on profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (InvalidInput, ProblemParams, RadialProfile, barenblatt,
                   pressure_of)
from .constants import sphere_exponents


@dataclass(frozen=True)
class FreeDiagnostics:
    mass: float
    E: float
    I: float
    G: float


def renyi_exponent(n, m):
    m1 = (n - 1.0) / n
    return 2 * (m - m1) / (1 - m)


def free_diagnostics(u: RadialProfile, params: ProblemParams) -> FreeDiagnostics:
    """E = int u^m, I = int u |P'|^2 and the Renyi power G = I E^{2(m-m1)/(1-m)}.

    The critical exponent m1 is taken in the profile's weight dimension.
    """
    m = params.exponent_m()
    if np.any(u.values <= 0):
        raise InvalidInput("free diagnostics need u > 0")
    P = pressure_of(u.values, m)
    dP = u.grid.derivative(P)
    E = u.integral(u.values ** m)
    I = u.integral(u.values * dP ** 2)
    G = I * E ** renyi_exponent(u.n, m)
    return FreeDiagnostics(u.mass(), E, I, G)


def relative_pair(v: RadialProfile, params: ProblemParams, B=None, mass_rtol=1e-8):
    """Relative entropy F, relative Fisher information and Q = I/F.

    B defaults to (1+r^2)^{1/(m-1)} on v's grid; v must carry the same mass.
    """
    m = params.exponent_m()
    if B is None:
        B = barenblatt(ProblemParams(params.d, m=m, n=v.n), v.grid)
    Mv, MB = v.mass(), B.mass()
    if abs(Mv - MB) > mass_rtol * MB:
        raise InvalidInput(f"mass mismatch: {Mv} vs {MB}")
    if np.any(v.values <= 0):
        raise InvalidInput("relative functionals need v > 0")
    b, x = B.values, v.values
    F = v.integral(b ** m * _bregman(x / b - 1.0, m))
    flux = v.grid.derivative(x ** (m - 1)) - 2 * v.r
    I = v.integral(x * flux ** 2)
    Q = I / F if F > 0 else math.nan
    return F, I, Q


def _bregman(s, m):
    """s - ((1+s)^m - 1)/m >= 0, with a series near s = 0 against cancellation."""
    s = np.asarray(s, float)
    out = s - np.expm1(m * np.log1p(s)) / m
    small = np.abs(s) < 1e-3
    ss = s[small]
    out[small] = 0.5 * (1 - m) * ss * ss * (1 + (m - 2) / 3 * ss + (m - 2) * (m - 3) / 12 * ss * ss)
    return np.maximum(out, 0.0)


def sandwich_eps(v, B, floor=1e-300):
    """Smallest eps with (1-eps) B <= v <= (1+eps) B on the grid."""
    vb = v.values if isinstance(v, RadialProfile) else np.asarray(v)
    bb = B.values if isinstance(B, RadialProfile) else np.asarray(B)
    mask = bb > floor
    return float(np.max(np.abs(vb[mask] / bb[mask] - 1.0)))


@dataclass(frozen=True)
class StabilityReport:
    deficit: float
    rel_entropy: float
    fisher_distance: float
    pck_lower: float
    best_match: RadialProfile
    l1_distance: float = math.nan
    deficit_expanded: float = math.nan
    drift: float = 2.0
    scale: float = 1.0


def _gns_best_match(f: RadialProfile, p):
    r = f.r
    g = (1.0 + r ** 2) ** (-1.0 / (p - 1))
    M0f = f.integral(f.values ** (2 * p))
    M2f = f.integral(r ** 2 * f.values ** (2 * p))
    M0g = f.integral(g ** (2 * p))
    M2g = f.integral(r ** 2 * g ** (2 * p))
    sigma = math.sqrt((M2f / M0f) / (M2g / M0g))
    # amplitude c from M0: c^{2p} sigma^n M0[g] on the dilated grid
    gs = (1.0 + (r / sigma) ** 2) ** (-1.0 / (p - 1))
    c = (M0f / f.integral(gs ** (2 * p))) ** (1.0 / (2 * p))
    # re-match M2 exactly on the truncated grid by a short fixed point
    for _ in range(50):
        cand = c * (1.0 + (r / sigma) ** 2) ** (-1.0 / (p - 1))
        ratio = (f.integral(r ** 2 * cand ** (2 * p)) / f.integral(cand ** (2 * p))) / (M2f / M0f)
        if abs(ratio - 1) < 1e-14:
            break
        sigma /= math.sqrt(ratio)
        gs = (1.0 + (r / sigma) ** 2) ** (-1.0 / (p - 1))
        c = (M0f / f.integral(gs ** (2 * p))) ** (1.0 / (2 * p))
    return c, sigma


def gns_stability(f: RadialProfile, params: ProblemParams, normalize: bool = True) -> StabilityReport:
    """Deficit of the GNS entropy inequality and its stability companions.

    The comparison profile g_f = c (1 + r^2/sigma^2)^{-1/(p-1)} matches the
    mass and the second moment of f^{2p}. The entropy inequality behind the
    deficit holds with constant 2A, A = 2 c^{1-p} / sigma^2 (grad g_f^{1-p} = A x).
    With `normalize` (default) f is first multiplied by the constant that
    makes A = 2, so the deficit takes its usual form with constant 4; the
    factor used is stored in `scale`.
    """
    p = params.exponent_p()
    d = params.d
    pstar = d / (d - 2.0) if d > 2 else math.inf
    if not 1 < p <= pstar:
        raise InvalidInput(f"p={p} outside (1, p*]")
    if np.any(f.values < 0):
        raise InvalidInput("f must be non-negative")
    if f.mass() <= 0:
        raise InvalidInput("f must be nontrivial")
    c, sigma = _gns_best_match(f, p)
    scale = 1.0
    if normalize:
        # f -> mu f sends c -> mu c and keeps sigma
        scale = 1.0 / (c * sigma ** (2.0 / (p - 1)))
        f = f.with_values(scale * f.values)
        c *= scale
    r, x = f.r, f.values
    g = c * (1.0 + (r / sigma) ** 2) ** (-1.0 / (p - 1))
    A = 2 * c ** (1 - p) / sigma ** 2
    df = f.grid.derivative(x)
    fisher = f.integral(((p - 1) * df + A * r * x ** p) ** 2)
    ent_dens = x ** (p + 1) - g ** (p + 1) - (1 + p) / (2 * p) * g ** (1 - p) * (x ** (2 * p) - g ** (2 * p))
    ent = 2 * p / (1 - p) * f.integral(ent_dens)
    deficit = (p + 1) / (p - 1) * fisher - 2 * A * ent
    l1 = f.integral(np.abs(x ** (2 * p) - g ** (2 * p)))
    pck = (p + 1) / (8 * p) / f.integral(g ** (3 * p - 1)) * l1 ** 2
    # same deficit after expanding the square and integrating by parts
    nn = f.n
    lp1f = f.integral(x ** (p + 1))
    lp1g = f.integral(g ** (p + 1))
    M2 = f.integral(r ** 2 * x ** (2 * p))
    expanded = ((p + 1) * (p - 1) * f.integral(df ** 2) - 2 * nn * A * lp1f
                + (p + 1) / (p - 1) * A ** 2 * M2 + 4 * p * A / (p - 1) * (lp1f - lp1g))
    return StabilityReport(deficit, ent, fisher, pck, f.with_values(g), l1, expanded, A, scale)


def heisenberg_check(f: RadialProfile, p: float):
    """(lhs, rhs) of (n/(p+1) int f^{p+1})^2 <= int |f'|^2 int r^2 f^{2p}."""
    x = f.values
    lhs = (f.n / (p + 1) * f.integral(np.abs(x) ** (p + 1))) ** 2
    rhs = f.integral(f.grid.derivative(x) ** 2) * f.integral(f.r ** 2 * np.abs(x) ** (2 * p))
    return lhs, rhs


def sphere_improved_deficit(f, d: int, p: float, grid=None):
    """Deficit of the improved interpolation inequality on S^d for a zonal f.

    `f` is either a callable of z = cos(angle) or an array of nodal values
    on `grid` (a ZonalGrid). Returns (improved_deficit, plain_deficit).
    """
    from .sphere.zonal import ZonalGrid
    ex = sphere_exponents(d, p)
    gam = ex.gamma_p
    if not ((1 <= p < 2) or (2 < p < ex.two_sharp)):
        raise InvalidInput(f"p={p} outside [1,2) U (2, 2#)")
    if abs(gam - (2 - p)) < 1e-14:
        raise InvalidInput("gamma(p) = 2 - p is excluded")
    if grid is None:
        grid = ZonalGrid(d, 96)
    vals = f(grid.z) if callable(f) else np.asarray(f, float)
    grad2 = grid.dirichlet(vals)
    l2 = grid.mean(vals ** 2)
    lp = grid.mean(np.abs(vals) ** p) ** (1.0 / p)
    a = 2 * gam / (2 - p)
    improved = grad2 - d / (2 - p - gam) * (l2 - lp ** (2 - a) * l2 ** (a / 2))
    plain = grad2 - d / (p - 2) * (lp ** 2 - l2) if p != 2 else math.nan
    return improved, plain
