"""Pseudo-arclength continuation of zonal solutions of
-(p-2) Delta u + lam u = u^{p-1} on S^d, bifurcating from constants.

Unknowns are Gegenbauer coefficients of v = u / c0 with c0 = lam_ell^{1/(p-2)},
which keeps the system O(1) for every p. The coefficient Jacobian is
symmetric, so its inertia gives the Morse signature along the branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..core import InvalidInput, NumericalFailure
from .zonal import ZonalGrid


@dataclass
class ContinuationConfig:
    ds0: float = 0.05
    ds_min: float = 1e-8
    ds_max: float = 1.0
    grow: float = 1.5
    max_steps: int = 4000
    newton_tol: float = 1e-10
    max_newton: int = 12
    nodes: int = 64
    stop_ratio: float = 1e6        # max/mean of u, concentration proxy
    tail_tol: float = 1e-6         # spectral tail / max coefficient
    lam_min: float = -math.inf
    lam_max: float = math.inf
    signature: bool = True


@dataclass
class BranchPoint:
    arclength: float
    lam: float
    mu: float
    signature: int
    q2: float
    peak: float
    tail: float


@dataclass
class Branch:
    d: int
    p: float
    ell: int
    antipodal: bool
    method: str
    points: List[BranchPoint] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    truncated: bool = False
    reason: str = ""
    system: object = None

    def column(self, name):
        return np.array([getattr(pt, name) for pt in self.points])

    @property
    def lam(self):
        return self.column("lam")

    @property
    def mu(self):
        return self.column("mu")


def bifurcation_value(ell, d):
    return ell * (ell + d - 1.0)


def check_exponent(d, p):
    pstar = 2.0 * d / (d - 2) if d > 2 else math.inf
    if not (1 < p <= pstar) or p == 2:
        raise InvalidInput(f"p={p} must lie in (1,2) U (2, {pstar}]")


class GaussSystem:
    """Coefficient-space residual F(c, lam) for v = u/c0 in the span of P."""

    def __init__(self, d, p, ell, N=64, antipodal=True):
        check_exponent(d, p)
        if ell < 1:
            raise InvalidInput("ell must be >= 1")
        if antipodal and ell % 2:
            raise InvalidInput("odd modes are not antipodally symmetric")
        self.d, self.p, self.ell = d, p, ell
        self.grid = ZonalGrid(d, N)
        keep = (self.grid.ell % 2 == 0) if antipodal else np.ones(N, bool)
        self.P = self.grid.P[:, keep]
        self.lap = self.grid.lap[keep]
        self.w = self.grid.w
        self.WP = self.P * self.w[:, None]
        self.K = bifurcation_value(ell, d)
        self.c0 = self.K ** (1.0 / (p - 2))
        self.k_mode = int(np.flatnonzero(self.grid.ell[keep] == ell)[0])
        self.n = self.P.shape[1]

    def start(self):
        c = np.zeros(self.n)
        c[0] = 1.0
        return c, self.K

    def mode(self):
        t = np.zeros(self.n)
        t[self.k_mode] = 1.0
        return t

    def v(self, c):
        return self.P @ c

    def F(self, c, lam):
        v = self.v(c)
        return (self.p - 2) * self.lap * c + lam * c - self.K * (self.WP.T @ v ** (self.p - 1))

    def J(self, c, lam):
        v = self.v(c)
        p = self.p
        M = -(p - 1) * self.K * (self.WP.T @ (self.P * (v ** (p - 2))[:, None]))
        M[np.diag_indices(self.n)] += (p - 2) * self.lap + lam
        return M

    def dF_dlam(self, c, lam):
        return c

    def positive(self, c):
        return self.v(c).min() > 0

    def norms(self, c):
        v = self.v(c)
        w, p = self.w, self.p
        Sp = np.dot(w, v ** p)
        lp = Sp ** (1.0 / p)
        l2 = np.dot(w, v * v)
        grad = np.dot(self.lap, c * c)
        return lp, l2, grad, Sp

    def mu(self, c):
        lp = self.norms(c)[0]
        return self.K * lp ** (self.p - 2)

    def dmu_dc(self, c):
        lp, _, _, Sp = self.norms(c)
        v = self.v(c)
        return self.K * (self.p - 2) * Sp ** (-2.0 / self.p) * (self.WP.T @ v ** (self.p - 1))

    def q2(self, c):
        lp, l2, grad, _ = self.norms(c)
        den = lp * lp - l2
        return (self.p - 2) * grad / den if den != 0 else math.nan

    def peak(self, c):
        v = self.v(c)
        return v.max() / np.dot(self.w, v)

    def tail(self, c):
        a = np.abs(c)
        return a[-3:].max() / a.max()

    def u_values(self, c):
        return self.c0 * self.v(c)

    def z_nodes(self):
        return self.grid.z

    def signature(self, c, lam):
        return int(np.sum(np.linalg.eigvalsh(self.J(c, lam)) < 0))

    def scale(self):
        return 1.0


def _corrector(sys, y0, xprev, tan, ds, cfg):
    """Newton on [F; tan.(y - xprev) - ds] = 0. Returns (y, ok, iters)."""
    y = y0.copy()
    n = sys.n
    sc = max(1.0, np.abs(y).max())
    for it in range(1, cfg.max_newton + 1):
        c, lam = y[:-1], y[-1]
        if not sys.positive(c):
            return y, False, it
        A = np.empty((n + 1, n + 1))
        A[:-1, :-1] = sys.J(c, lam)
        A[:-1, -1] = sys.dF_dlam(c, lam)
        A[-1] = tan
        R = np.concatenate([sys.F(c, lam), [tan @ (y - xprev) - ds]])
        try:
            dy = np.linalg.solve(A, -R)
        except np.linalg.LinAlgError:
            return y, False, it
        y = y + dy
        step = np.abs(dy).max()
        if not np.all(np.isfinite(y)) or not sys.positive(y[:-1]):
            return y, False, it
        if hasattr(sys, "clip"):
            y[:-1] = sys.clip(y[:-1])
        if step < cfg.newton_tol * sc:
            res = np.abs(sys.F(y[:-1], y[-1])).max()
            return y, (res < 10 * cfg.newton_tol * sc and sys.positive(y[:-1])), it
        if getattr(sys, "relaxed", False):
            res = np.abs(sys.F(y[:-1], y[-1])).max()
            # ill-conditioned discretizations: accept on a small residual
            if res < 1e-8 * sc and step < 1e-5 * sc:
                return y, res < 1e-7 * sc and sys.positive(y[:-1]), it
    return y, False, cfg.max_newton


def run_continuation(sys, direction=1, cfg: Optional[ContinuationConfig] = None,
                     stop_when: Optional[Callable] = None, method="gauss",
                     antipodal=True) -> Branch:
    """Follow the branch leaving (constant, lam_ell) along +-(critical mode)."""
    cfg = cfg or ContinuationConfig()
    if direction not in (1, -1):
        raise InvalidInput("direction must be +1 or -1")
    c, lam = sys.start()
    x = np.concatenate([c, [lam]])
    tan = np.concatenate([direction * sys.mode(), [0.0]])
    tan /= np.linalg.norm(tan)
    br = Branch(sys.d, sys.p, sys.ell, antipodal, method, system=sys)

    def record(y, s):
        c, lam = y[:-1], y[-1]
        sig = sys.signature(c, lam) if cfg.signature else -1
        pt = BranchPoint(s, lam, sys.mu(c), sig, sys.q2(c),
                         sys.peak(c), sys.tail(c))
        br.points.append(pt)
        br.states.append(c.copy())
        return pt

    record(x, 0.0)
    ds, s = cfg.ds0, 0.0
    while len(br.points) < cfg.max_steps:
        y, ok, iters = _corrector(sys, x + ds * tan, x, tan, ds, cfg)
        if not ok:
            ds *= 0.5
            if ds < cfg.ds_min:
                br.truncated, br.reason = True, "newton failure after step halving"
                break
            continue
        new_tan = y - x
        s += np.linalg.norm(new_tan)
        new_tan /= np.linalg.norm(new_tan)
        tan, x = new_tan, y
        pt = record(y, s)
        if iters < 4:
            ds = min(ds * cfg.grow, cfg.ds_max)
        if pt.tail > cfg.tail_tol:
            br.truncated, br.reason = True, "under-resolved (spectral tail)"
            break
        if pt.peak > cfg.stop_ratio:
            br.truncated, br.reason = True, "concentration"
            break
        if not (cfg.lam_min <= pt.lam <= cfg.lam_max):
            br.reason = "left lambda window"
            break
        if stop_when is not None and stop_when(br):
            br.reason = "stop condition"
            break
    else:
        br.reason = "max steps"
    return br


def continue_branch(ell: int, d: int, p: float, direction: int = 1,
                    cfg: Optional[ContinuationConfig] = None,
                    antipodal: Optional[bool] = None, stop_when=None) -> Branch:
    """Branch of zonal solutions bifurcating from the constant at lam = ell(ell+d-1)."""
    cfg = cfg or ContinuationConfig()
    if antipodal is None:
        antipodal = ell % 2 == 0
    sys = GaussSystem(d, p, ell, cfg.nodes, antipodal)
    return run_continuation(sys, direction, cfg, stop_when, "gauss", antipodal)


def constant_branch_bifurcations(d, p, lam_max, N=64, tol=1e-12):
    """Values of lam where the constant solution's Jacobian changes inertia."""
    check_exponent(d, p)
    g = ZonalGrid(d, N)
    gram = g.P.T @ (g.P * g.w[:, None])

    def sig(lam):
        u = lam ** (1.0 / (p - 2))
        J = -(p - 1) * u ** (p - 2) * gram
        J[np.diag_indices(N)] += (p - 2) * g.lap + lam
        return int(np.sum(np.linalg.eigvalsh(J) < 0))

    # scan on a grid fine enough to separate consecutive eigenvalues
    grid = np.linspace(1e-3, lam_max, int(40 * lam_max) + 2)
    sigs = [sig(l) for l in grid]
    out = []
    for i in range(1, len(grid)):
        if sigs[i] != sigs[i - 1]:
            a, b = grid[i - 1], grid[i]
            sa = sigs[i - 1]
            while b - a > tol * max(1.0, b):
                mid = 0.5 * (a + b)
                if sig(mid) == sa:
                    a = mid
                else:
                    b = mid
            out.append(0.5 * (a + b))
    return out


def solve_at_lambda(br: Branch, lam: float, c_init=None, tol=1e-12, maxit=30):
    """Newton at fixed lam on the branch's discretization."""
    sys = br.system
    if c_init is None:
        c_init = interpolate_state(br, lam)
    c = c_init.copy()
    for _ in range(maxit):
        dc = np.linalg.solve(sys.J(c, lam), -sys.F(c, lam))
        c = c + dc
        if np.abs(dc).max() < tol * max(1.0, np.abs(c).max()):
            break
    else:
        raise NumericalFailure(f"fixed-lambda Newton failed at lam={lam}")
    if not sys.positive(c):
        raise NumericalFailure(f"lost positivity at lam={lam}")
    return c


def segments_covering(br: Branch, lam):
    L = br.lam
    return [i for i in range(len(L) - 1) if min(L[i], L[i + 1]) <= lam <= max(L[i], L[i + 1])]


def interpolate_state(br: Branch, lam, seg=None):
    L = br.lam
    if seg is None:
        segs = segments_covering(br, lam)
        if not segs:
            raise InvalidInput(f"lam={lam} not covered by the branch")
        seg = segs[0]
    a, b = L[seg], L[seg + 1]
    t = 0.0 if b == a else (lam - a) / (b - a)
    return (1 - t) * br.states[seg] + t * br.states[seg + 1]


def mu_of_lambda(d: int, p: float, lam_grid, branches=None, N=64):
    """mu(lam) = min over the constant branch and the computed branches.

    Each branch value is re-solved at the exact lam by Newton, starting from
    the interpolated neighbouring state, so no interpolation error remains.
    """
    lam_grid = np.asarray(lam_grid, float)
    if branches is None:
        cfg = ContinuationConfig(nodes=N, lam_max=float(lam_grid.max()) + 1.0,
                                 lam_min=0.0)
        branches = [pick_branch(1, d, p, cfg, toward=+1)]
    out = lam_grid.copy()
    for br in branches:
        for i, lam in enumerate(lam_grid):
            for seg in segments_covering(br, lam):
                try:
                    c = solve_at_lambda(br, lam, interpolate_state(br, lam, seg))
                except NumericalFailure:
                    continue
                if np.abs(c[1:]).max() < 1e-8:
                    continue   # converged back onto the constant solution
                out[i] = min(out[i], br.system.mu(c))
    return out


def pick_branch(ell, d, p, cfg, toward=+1, antipodal=None):
    """Continue in the direction whose initial lam motion has sign `toward`."""
    best = None
    for direction in (1, -1):
        br = continue_branch(ell, d, p, direction, cfg, antipodal)
        if len(br.points) > 1 and np.sign(br.points[-1].lam - br.points[0].lam) == toward:
            return br
        best = best or br
    return best


def is_concave(lam, mu, tol=1e-8):
    """Three-point concavity test on a (possibly nonuniform) grid."""
    lam, mu = np.asarray(lam), np.asarray(mu)
    for i in range(1, len(lam) - 1):
        t = (lam[i] - lam[i - 1]) / (lam[i + 1] - lam[i - 1])
        chord = (1 - t) * mu[i - 1] + t * mu[i + 1]
        if mu[i] < chord - tol:
            return False
    return True
