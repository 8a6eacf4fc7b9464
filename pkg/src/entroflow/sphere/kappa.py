"""Optimal constant kappa_p of the antipodal interpolation inequality on S^d.

kappa_p is the value of lam at which the antipodal branch leaving the
constants at lam_2 = 2(d+1) meets the diagonal mu = lam. At that point the
solution is a critical point of the quotient
    Q2[u] = (p-2) |grad u|^2 / (|u|_p^2 - |u|_2^2),
and Q2 = mu = lam there, which gives a second, independent readout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..core import InvalidInput, NumericalFailure
from .branches import (Branch, ContinuationConfig, GaussSystem, check_exponent,
                       run_continuation)
from .cylinder import CylinderSystem


@dataclass
class KappaResult:
    p: float
    value: float
    method: str
    attained: bool
    bracket: tuple
    q2: float
    tail: float
    branch: Optional[Branch] = None


def _crossings(br: Branch):
    g = br.mu - br.lam
    return [i for i in range(2, len(g)) if g[i - 1] * g[i] < 0]


def _stop_after_crossing(extra=2):
    def stop(br):
        c = _crossings(br)
        return bool(c) and len(br.points) >= c[0] + extra
    return stop


def refine_crossing(sys, br: Branch, i, tol=1e-12, maxit=40):
    """Newton on [F(c, lam); mu(c) - lam] from the bracket (i-1, i)."""
    pa, pb = br.points[i - 1], br.points[i]
    ga, gb = pa.mu - pa.lam, pb.mu - pb.lam
    t = ga / (ga - gb)
    c = (1 - t) * br.states[i - 1] + t * br.states[i]
    lam = (1 - t) * pa.lam + t * pb.lam
    y = np.concatenate([c, [lam]])
    n = sys.n
    relaxed = getattr(sys, "relaxed", False)
    for _ in range(maxit):
        c, lam = y[:-1], y[-1]
        A = np.empty((n + 1, n + 1))
        A[:-1, :-1] = sys.J(c, lam)
        A[:-1, -1] = sys.dF_dlam(c, lam)
        A[-1, :-1] = sys.dmu_dc(c)
        A[-1, -1] = -1.0
        R = np.concatenate([sys.F(c, lam), [sys.mu(c) - lam]])
        dy = np.linalg.solve(A, -R)
        y = y + dy
        sc = max(1.0, np.abs(y).max())
        if np.abs(dy).max() < tol * sc:
            break
        if relaxed:
            res = np.abs(np.concatenate([sys.F(y[:-1], y[-1]), [sys.mu(y[:-1]) - y[-1]]])).max()
            if res < 1e-10 * sc and np.abs(dy).max() < 1e-7 * sc:
                break
    else:
        raise NumericalFailure("crossing refinement did not converge")
    c, lam = y[:-1], y[-1]
    res = np.abs(sys.F(c, lam)).max()
    if res > (1e-7 if relaxed else 1e-9) * max(1.0, np.abs(y).max()):
        raise NumericalFailure(f"crossing refinement left residual {res:.2e}")
    if not (min(pa.lam, pb.lam) - 1e-6 <= lam <= max(pa.lam, pb.lam) + 1e-6):
        raise NumericalFailure("refined crossing left its bracket")
    return lam, c


def _gauss_cfg(nodes):
    return ContinuationConfig(nodes=nodes, lam_min=0.0, lam_max=40.0, max_steps=800,
                              signature=False)


def _cyl_cfg():
    return ContinuationConfig(ds0=0.05, ds_max=0.5, grow=1.3, max_newton=15,
                              lam_min=0.0, lam_max=40.0, max_steps=3000,
                              signature=False, tail_tol=1e-8, stop_ratio=math.inf)


def _try(sys, cfg, method, resolved_tol):
    last = None
    for direction in (1, -1):
        br = run_continuation(sys, direction, cfg, _stop_after_crossing(), method)
        last = br
        cr = _crossings(br)
        if not cr:
            continue
        i = cr[0]
        tail = max(br.points[i - 1].tail, br.points[i].tail)
        if tail > resolved_tol:
            return None, br
        lam, c = refine_crossing(sys, br, i)
        return KappaResult(sys.p, lam, method, True,
                           (br.points[i - 1].lam, br.points[i].lam), sys.q2(c),
                           tail, br), br
    return None, last


def kappa_detail(d: int, p: float, method: str = "auto", nodes: int = 128,
                 cyl_nodes: int = 300, cyl_length: float = 30.0,
                 cfg: Optional[ContinuationConfig] = None) -> KappaResult:
    """kappa_p with provenance (method, bracket, resolution)."""
    if d < 1:
        raise InvalidInput("d must be positive")
    pstar = 2.0 * d / (d - 2) if d > 2 else math.inf
    if p == 1:
        return KappaResult(1.0, 2.0 * (d + 1), "closed-form", True, (), math.nan, 0.0)
    if p == 2:
        raise InvalidInput("p = 2 is the logarithmic case; not computed here")
    check_exponent(d, p)
    if method not in ("auto", "gauss", "cylinder"):
        raise InvalidInput(f"unknown method {method!r}")
    if p == pstar:
        return _critical_limit(d, p, cyl_nodes, cyl_length)
    if method in ("auto", "gauss"):
        gcfg = cfg or _gauss_cfg(nodes)
        sys = GaussSystem(d, p, 2, gcfg.nodes, antipodal=True)
        res, br = _try(sys, gcfg, "gauss", 1e-10 if method == "auto" else math.inf)
        if res is not None:
            return res
        if method == "gauss" or d < 3:
            raise NumericalFailure(
                f"no crossing found; branch covers lam in [{br.lam.min():.6g}, {br.lam.max():.6g}]"
                f" ({br.reason})")
    ccfg = cfg if (cfg is not None and method == "cylinder") else _cyl_cfg()
    sys = CylinderSystem(d, p, 2, cyl_nodes, cyl_length)
    res, br = _try(sys, ccfg, "cylinder", ccfg.tail_tol)
    if res is None:
        raise NumericalFailure(
            f"branch truncated before a crossing; lam in [{br.lam.min():.6g}, {br.lam.max():.6g}]"
            f" ({br.reason})")
    return res


def _critical_limit(d, p, N, L):
    """p = 2*: no crossing exists; report the infimum of Q2 along the
    concentrating branch (an upper bound that converges as the bump separates)."""
    if d < 3:
        raise InvalidInput("critical exponent needs d >= 3")
    sys = CylinderSystem(d, p, 2, N, L)
    cfg = _cyl_cfg()
    best = None
    for direction in (1, -1):
        br = run_continuation(sys, direction, replace(cfg, lam_max=2.0 * (d + 1) + 1e-9),
                              _stop_far_bump(L), "cylinder")
        q = br.column("q2")
        if len(q) < 3:
            continue
        j = int(np.nanargmin(q))
        if best is None or q[j] < best.value:
            best = KappaResult(p, float(q[j]), "cylinder-limit", False,
                               (float(br.lam.min()), float(br.lam.max())), float(q[j]),
                               br.points[j].tail, br)
    if best is None:
        raise NumericalFailure("critical branch could not be followed")
    return best


def _stop_far_bump(L, margin=12.0):
    def stop(br):
        return br.points[-1].peak > L - margin
    return stop


def kappa_p(d: int, p: float, method: str = "auto", **kw) -> float:
    return kappa_detail(d, p, method, **kw).value
