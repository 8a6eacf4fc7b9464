"""Spectral gaps: Hardy-Poincare around the Barenblatt profile, OU Poincare
and entropy constants on the line, zonal Laplacian on S^d."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy import optimize
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.special import roots_legendre

from .core import InvalidInput, NumericalFailure


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    gap: float
    constraints: List[str]
    mesh_size: int
    richardson_estimate: float = math.nan
    raw: dict = field(default_factory=dict)

    def to_json(self):
        return {"eigenvalues": [float(x) for x in self.eigenvalues],
                "gap": float(self.gap), "constraints": list(self.constraints),
                "mesh_size": int(self.mesh_size),
                "richardson_estimate": float(self.richardson_estimate)}


# ---------------------------------------------------------------- Hardy-Poincare

_GX, _GW = roots_legendre(6)
_GX = 0.5 * (_GX + 1)
_GW = 0.5 * _GW


def _element_moments(r, fun):
    """Per element: int fun * (1-s) and int fun * s over [r_i, r_{i+1}]."""
    a = r[:-1][:, None]
    h = np.diff(r)[:, None]
    x = a + h * _GX[None, :]
    vals = fun(x) * h * _GW[None, :]
    return vals.sum(axis=1), (vals * (1 - _GX)).sum(axis=1), (vals * _GX).sum(axis=1)


def _hp_sector(d, m, ell, N, r_max):
    """Lumped-mass P1 matrices of the quotient 2(1-m) int B|grad h|^2 / int B^{2-m} h^2
    in angular sector ell. Returns the symmetric tridiagonal (diag, off), nodes, M."""
    s = np.linspace(0.0, math.asinh(r_max), N)
    r = np.sinh(s)
    B = lambda x: (1 + x * x) ** (1.0 / (m - 1))
    c = 2 * (1 - m)
    tot, _, _ = _element_moments(r, lambda x: B(x) * x ** (d - 1))
    h = np.diff(r)
    ke = c * tot / h ** 2
    diag = np.zeros(N)
    diag[:-1] += ke
    diag[1:] += ke
    off = -ke.copy()
    _, ml, mr = _element_moments(r, lambda x: B(x) ** (2 - m) * x ** (d - 1))
    M = np.zeros(N)
    M[:-1] += ml
    M[1:] += mr
    if ell > 0:
        if d == 1:
            cent = 0.0    # odd sector on the line: no centrifugal term
        else:
            cent = ell * (ell + d - 2.0)
        if cent:
            _, cl, cr = _element_moments(r, lambda x: B(x) * x ** (d - 3))
            V = np.zeros(N)
            V[:-1] += cl
            V[1:] += cr
            diag += c * cent * V
        # h(0) = 0 in every non-radial sector
        diag, off, M, r = diag[1:], off[1:], M[1:], r[1:]
    sq = np.sqrt(M)
    return diag / M, off / (sq[:-1] * sq[1:]), r, M


def _constrained_eigs(diag, off, M, vecs, k):
    """Lowest k eigenvalues of the sector operator on the M-orthogonal
    complement of `vecs` (given as nodal functions)."""
    if not vecs:
        return eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))[0]
    n = diag.size
    A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    C = np.column_stack([np.sqrt(M) * v for v in vecs])
    Q, _ = np.linalg.qr(C, mode="complete")
    Z = Q[:, C.shape[1]:]
    ev = eigh(Z.T @ A @ Z, eigvals_only=True, subset_by_index=(0, k - 1))
    return ev


def _hp_once(d, m, level, N, r_max, k):
    out = []
    # radial sector: the constant is an exact discrete null vector, so the
    # first constraint is imposed by deflating it
    dg, of, r, M = _hp_sector(d, m, 0, N, r_max)
    if level >= 2:
        ev = _constrained_eigs(dg, of, M, [np.ones_like(r), r ** 2], k)
    else:
        ev = eigh_tridiagonal(dg, of, select="i", select_range=(0, k))[0][1:]
    out.append(ev)
    dg, of, r, M = _hp_sector(d, m, 1, N, r_max)
    vecs = [r] if level >= 1 else []
    out.append(_constrained_eigs(dg, of, M, vecs, k))
    if d >= 2:
        dg, of, r, M = _hp_sector(d, m, 2, N, r_max)
        out.append(_constrained_eigs(dg, of, M, [], k))
    return np.sort(np.concatenate(out))[:k]


def hardy_poincare_spectrum(d: int, m: float, level: int = 0, mesh: int = 400,
                            r_max: float = 1e6, n_eig: int = 6) -> EigenResult:
    """Lowest eigenvalues of the linearized quotient around the Barenblatt profile.

    level 0 imposes int h B^{2-m} = 0, level 1 also int x h B^{2-m} = 0,
    level 2 also int |x|^2 h B^{2-m} = 0. Meshes N, 2N, 4N are combined by
    Richardson extrapolation (second order in the sinh-stretched variable).
    """
    m1 = (d - 1.0) / d
    if not (m1 <= m < 1 and m > 0):
        raise InvalidInput(f"m={m} outside (m1, 1)")
    if level not in (0, 1, 2):
        raise InvalidInput("level must be 0, 1 or 2")
    if m == m1 and level < 2:
        raise InvalidInput("m = m1 needs level 2")
    if mesh < 50:
        raise InvalidInput("mesh too coarse")
    evs = [_hp_once(d, m, level, n, r_max, n_eig) for n in (mesh, 2 * mesh, 4 * mesh)]
    r1 = (4 * evs[1] - evs[0]) / 3
    r2 = np.sort((4 * evs[2] - evs[1]) / 3)
    est = float(abs(r2[0] - r1[0]))
    names = ["int h B^{2-m} = 0", "int x h B^{2-m} = 0", "int |x|^2 h B^{2-m} = 0"]
    return EigenResult(r2, float(r2[0]), names[:level + 1], 4 * mesh, est,
                       {"meshes": [mesh, 2 * mesh, 4 * mesh], "raw": [e.tolist() for e in evs]})


# ---------------------------------------------------------------- line, OU

def _confining_window(phi: Callable, floor=50.0):
    xs = np.linspace(-50, 50, 20001)
    vals = np.array([phi(x) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise InvalidInput("potential must be finite")
    i0 = int(np.argmin(vals))
    x0, v0 = xs[i0], vals[i0]
    ends = []
    for sgn in (-1, 1):
        step, x = 0.5, x0
        while phi(x) - v0 < floor:
            x += sgn * step
            step *= 1.2
            if abs(x) > 1e4:
                raise InvalidInput("potential is not confining (e^{-phi} not integrable)")
        ends.append(x)
    return ends[0], ends[1], v0


def _line_matrices(phi, mesh):
    a, b, v0 = _confining_window(phi)
    x = np.linspace(a, b, mesh)
    h = x[1] - x[0]
    pv = np.array([phi(t) for t in x]) - v0
    mid = np.array([phi(t) for t in 0.5 * (x[1:] + x[:-1])]) - v0
    k = np.exp(-mid) / h
    mu = np.exp(-pv) * h
    mu[0] *= 0.5
    mu[-1] *= 0.5
    return x, k, mu


def ou_spectrum(phi: Callable, n_eig: int = 6, mesh: int = 4001) -> EigenResult:
    """Lowest eigenvalues of -L = -d^2/dx^2 + phi' d/dx on L^2(e^{-phi} dx).

    The first eigenvalue is 0 (constants); the gap is the Poincare constant.
    """
    if mesh < 101:
        raise InvalidInput("mesh too coarse")
    if n_eig < 2:
        raise InvalidInput("need at least two eigenvalues")
    x, k, mu = _line_matrices(phi, mesh)
    diag = np.zeros(mesh)
    diag[:-1] += k
    diag[1:] += k
    sq = np.sqrt(mu)
    ev = eigh_tridiagonal(diag / mu, -k / (sq[:-1] * sq[1:]), select="i",
                          select_range=(0, n_eig - 1))[0]
    return EigenResult(ev, float(ev[1]), ["int w e^{-phi} = 0 for the gap"], mesh)


def ou_kappa0(phi: Callable, mesh: int = 4001) -> float:
    """Poincare constant of e^{-phi} dx on the line (first nonzero eigenvalue)."""
    return ou_spectrum(phi, 2, mesh).gap


def _quotient(g, p, k, mu):
    f = np.exp(g)
    df = np.diff(f)
    Kf = np.zeros_like(f)
    Kf[:-1] -= k * df
    Kf[1:] += k * df
    dirich = np.dot(k, df * df)
    M = np.dot(mu, f * f)
    if p == 2:
        num = 2 * dirich
        lf = np.log(f * f / M)
        den = np.dot(mu, f * f * lf)
        dden = 2 * mu * f * lf
        dnum = 4 * Kf
    else:
        S = np.dot(mu, f ** p)
        num = (2 - p) * dirich
        den = M - S ** (2.0 / p)
        dnum = 2 * (2 - p) * Kf
        dden = 2 * mu * f - 2 * S ** (2.0 / p - 1) * mu * f ** (p - 1)
    if den <= 0:
        return math.inf, np.zeros_like(g)
    Q = num / den
    grad = (dnum - Q * dden) / den * f
    return Q, grad


def kappa1_minimize(phi: Callable, p: float, mesh: int = 241, seed: int = 0,
                    n_starts: int = 8) -> float:
    """inf over positive f of the entropy quotient Q_p (p in [1,2]).

    Minimizes over log f with L-BFGS from seeded random smooth starts and
    from a small perturbation along the first Poincare mode.
    """
    if not 1 <= p <= 2:
        raise InvalidInput("p must lie in [1, 2]")
    x, k, mu = _line_matrices(phi, mesh)
    Z = mu.sum()
    mu, k = mu / Z, k / Z
    # first nonzero mode for the near-linear start
    diag = np.zeros(mesh)
    diag[:-1] += k
    diag[1:] += k
    sq = np.sqrt(mu)
    _, vec = eigh_tridiagonal(diag / mu, -k / (sq[:-1] * sq[1:]), select="i", select_range=(1, 1))
    mode = vec[:, 0] / sq
    mode /= np.abs(mode).max()
    rng = np.random.default_rng(seed)
    span = x[-1] - x[0]
    starts = [0.05 * mode]
    for _ in range(n_starts):
        coef = rng.normal(size=6) / (1 + np.arange(6))
        g0 = sum(c * np.sin((j + 1) * math.pi * (x - x[0]) / span + rng.uniform(0, math.pi))
                 for j, c in enumerate(coef))
        starts.append(0.5 * g0)
    best = math.inf
    for g0 in starts:
        res = optimize.minimize(_quotient, g0, args=(p, k, mu), jac=True, method="L-BFGS-B",
                                options={"maxiter": 3000, "ftol": 1e-14, "gtol": 1e-10})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    if not np.isfinite(best):
        raise NumericalFailure("entropy quotient minimization failed")
    return best


def bakry_emery_bound(phi: Callable, mesh=4001):
    """ess inf phi'' over the confining window (finite differences)."""
    a, b, _ = _confining_window(phi)
    x = np.linspace(a, b, mesh)
    h = 1e-4
    second = np.array([(phi(t + h) - 2 * phi(t) + phi(t - h)) / h ** 2 for t in x])
    return float(second.min())


# ---------------------------------------------------------------- sphere

def sphere_zonal_spectrum(d: int, n_modes: int, mesh: int = 64, even: bool = False) -> EigenResult:
    """Lowest non-constant zonal eigenvalues of the Laplace-Beltrami operator on S^d."""
    from .sphere.zonal import zonal_spectrum
    if d < 1:
        raise InvalidInput("d must be positive")
    ev = zonal_spectrum(d, n_modes + 1, mesh, even)
    pos = ev[ev > 1e-8][:n_modes]
    cons = ["zero mean on S^d (constants removed)"]
    if even:
        cons.append("antipodal: u(-x) = u(x)")
    return EigenResult(pos, float(pos[0]), cons, mesh)
