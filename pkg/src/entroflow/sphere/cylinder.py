"""Antipodal branches in the Emden-Fowler (cylinder) variable.

With z = tanh t and u = cosh^k(t) w, k = (d-2)/2, concentrating zonal
solutions become two well separated bumps in t, which a Chebyshev grid on
[0, L] resolves uniformly as p approaches the critical exponent. The
equation for w reads

    -(p-2) w'' + (p-2) k^2 w + (lam - (p-2) d(d-2)/4) sech^2 w
        - sech^{2-k(p-2)} w^{p-1} = 0,

with w'(0) = 0 (evenness in z) and a Robin condition at t = L which is
exact for the constant solution.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg

from ..core import InvalidInput
from .branches import bifurcation_value, check_exponent


def cheb_lobatto(N, L):
    """Nodes t in [0, L] (t[0] = 0), differentiation matrix, Clenshaw-Curtis weights."""
    k = np.arange(N + 1)
    x = np.cos(np.pi * k / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2
    c *= (-1.0) ** k
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    theta = np.pi * k / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for j in range(1, N // 2):
            v -= 2 * np.cos(2 * j * theta[1:-1]) / (4 * j * j - 1)
        v -= np.cos(N * theta[1:-1]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / N ** 2
        for j in range(1, (N - 1) // 2 + 1):
            v -= 2 * np.cos(2 * j * theta[1:-1]) / (4 * j * j - 1)
    w[1:-1] = 2 * v / N
    t = (1 - x) * L / 2
    return t, -D * 2 / L, w * L / 2


class CylinderSystem:
    """Collocation residual for w / c0 on [0, L]; unknowns are nodal values."""

    relaxed = True   # D^2 is badly conditioned; convergence judged on residual

    def __init__(self, d, p, ell=2, N=300, L=30.0):
        check_exponent(d, p)
        if d < 3:
            raise InvalidInput("the cylinder variable needs d >= 3")
        if ell != 2:
            raise InvalidInput("only the first antipodal mode (ell = 2) is implemented")
        self.d, self.p, self.ell = d, p, ell
        self.N, self.L = N, L
        self.k = (d - 2) / 2.0
        t, D, q = cheb_lobatto(N, L)
        self.t, self.D, self.q = t, D, q
        self.sech = 1 / np.cosh(t)
        self.th = np.tanh(t)
        self.Z = np.dot(q, self.sech ** d)
        self.e = 2 - self.k * (p - 2)
        self.A = -(p - 2) * (D @ D) + (p - 2) * self.k ** 2 * np.eye(N + 1)
        self.pot = self.sech ** 2
        self.shift = (p - 2) * d * (d - 2) / 4.0
        self.K = bifurcation_value(ell, d)
        self.c0 = self.K ** (1.0 / (p - 2))
        self.src = self.K * self.sech ** self.e
        self.n = N + 1

    def start(self):
        return self.sech ** self.k, self.K

    def mode(self):
        phi = self.sech ** self.k * ((self.d + 1) * self.th ** 2 - 1)
        return phi / math.sqrt(np.dot(self.q, phi ** 2))

    def F(self, w, lam):
        w = np.abs(w)
        r = self.A @ w + (lam - self.shift) * self.pot * w - self.src * w ** (self.p - 1)
        r[0] = self.D[0] @ w
        r[-1] = self.D[-1] @ w + self.k * self.th[-1] * w[-1]
        return r

    def J(self, w, lam):
        w = np.abs(w)
        M = self.A + np.diag((lam - self.shift) * self.pot - (self.p - 1) * self.src * w ** (self.p - 2))
        M[0] = self.D[0]
        M[-1] = self.D[-1]
        M[-1, -1] += self.k * self.th[-1]
        return M

    def dF_dlam(self, w, lam):
        out = self.pot * np.abs(w)
        out[0] = out[-1] = 0.0
        return out

    def positive(self, w):
        # the far tail sits at rounding level; tolerate tiny negative noise
        return w.min() > -1e-10 * np.abs(w).max()

    def clip(self, w):
        return np.abs(w)

    def norms(self, w):
        w = np.abs(w)
        q, s, p = self.q, self.sech, self.p
        l2 = np.dot(q, s ** 2 * w * w) / self.Z
        Sp = np.dot(q, s ** (self.d - self.k * p) * w ** p) / self.Z
        grad = np.dot(q, (self.D @ w + self.k * self.th * w) ** 2) / self.Z
        return Sp ** (1.0 / p), l2, grad, Sp

    def mu(self, w):
        return self.K * self.norms(w)[0] ** (self.p - 2)

    def dmu_dc(self, w):
        w = np.abs(w)
        _, _, _, Sp = self.norms(w)
        p = self.p
        dS = p * self.q * self.sech ** (self.d - self.k * p) * w ** (p - 1) / self.Z
        return self.K * (p - 2) / p * Sp ** ((p - 2) / p - 1) * dS

    def q2(self, w):
        lp, l2, grad, _ = self.norms(w)
        den = lp * lp - l2
        return (self.p - 2) * grad / den if den != 0 else math.nan

    def peak(self, w):
        """Location in t of the maximum of w (distance of the bump from the equator)."""
        return float(self.t[np.argmax(np.abs(w))])

    def tail(self, w):
        return abs(w[-1]) / np.abs(w).max()

    def u_values(self, w):
        return self.c0 * np.cosh(self.t) ** self.k * np.abs(w)

    def z_nodes(self):
        return self.th

    def signature(self, w, lam):
        """Negative eigenvalues of the linearization (boundary rows as constraints)."""
        B = np.eye(self.n)
        B[0, 0] = B[-1, -1] = 0.0
        ev = linalg.eigvals(self.J(w, lam), B)
        ev = ev[np.isfinite(ev)]
        return int(np.sum(ev.real < 0))
