"""Zonal functions on S^d: Gauss-Gegenbauer nodes, orthonormal basis, spectrum."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from ..core import InvalidInput


class ZonalGrid:
    """Gauss nodes for the zonal measure (1-z^2)^{(d-2)/2} dz on [-1, 1].

    Weights are normalized to a probability measure, so `mean` is the
    average over S^d. Column k of `P` is the orthonormal Gegenbauer
    polynomial of degree k at the nodes; -Delta acts on it by k(k+d-1).
    """

    def __init__(self, d: int, N: int):
        if d < 1:
            raise InvalidInput("d must be positive")
        if N < 4:
            raise InvalidInput("need at least 4 nodes")
        self.d, self.N = d, N
        self.z, self.w, self.P = _basis(d, N)
        self.ell = np.arange(N)
        self.lap = self.ell * (self.ell + d - 1.0)

    def mean(self, f):
        return float(np.dot(self.w, f))

    def coeffs(self, f):
        return self.P.T @ (self.w * f)

    def values(self, c):
        return self.P @ c

    def dirichlet(self, f):
        """Average of |grad f|^2 over S^d (exact for polynomials of degree < N)."""
        c = self.coeffs(f)
        return float(np.dot(self.lap, c * c))

    def laplacian(self, f):
        return self.P @ (-self.lap * self.coeffs(f))


@lru_cache(maxsize=32)
def _basis_cached(d, N):
    a = (d - 2) / 2.0
    z, w = roots_jacobi(N, a, a)
    w = w / w.sum()
    lam = a + 0.5
    P = np.empty((N, N))
    P[:, 0] = 1.0
    s_prev = 0.0
    for k in range(1, N):
        # monic recurrence coefficient b_k for Gegenbauer(lam), in stable form
        if k == 1:
            bk = 1.0 / (2 * (1 + lam))
        else:
            bk = k * (k + 2 * lam - 1) / (4 * (k + lam) * (k + lam - 1))
        sk = np.sqrt(bk)
        prev = P[:, k - 2] if k >= 2 else 0.0
        P[:, k] = (z * P[:, k - 1] - s_prev * prev) / sk
        s_prev = sk
    for arr in (z, w, P):
        arr.setflags(write=False)
    return z, w, P


def _basis(d, N):
    return _basis_cached(int(d), int(N))


def barycentric_diff(x):
    """Differentiation matrix of the polynomial interpolant through nodes x."""
    x = np.asarray(x, float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    # scaled barycentric weights, computed in log form to avoid overflow
    logw = -np.sum(np.log(np.abs(dx)), axis=1)
    sign = np.prod(np.sign(dx), axis=1)
    wb = sign * np.exp(logw - logw.max())
    D = (wb[None, :] / wb[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def zonal_operator(d, z):
    """Nodal matrix of -Delta on zonal functions: -(1-z^2) u'' + d z u'."""
    D = barycentric_diff(z)
    return -(1 - z * z)[:, None] * (D @ D) + (d * z)[:, None] * D


def zonal_spectrum(d: int, n_modes: int, N: int = 64, even: bool = False):
    """Lowest eigenvalues of -Delta on zonal (optionally even) functions.

    The operator is discretized by collocation with a barycentric
    differentiation matrix, independent of the orthonormal basis.
    """
    if N < 32:
        raise InvalidInput("use at least 32 nodes")
    if n_modes < 1 or n_modes > N // 2:
        raise InvalidInput("n_modes must lie in [1, N/2]")
    z, _, _ = _basis(d, N)
    L = zonal_operator(d, z)
    if even:
        # nodes are symmetric: fold onto z >= 0 using u(-z) = u(z)
        order = np.argsort(z)
        z = z[order]
        L = L[np.ix_(order, order)]
        up = np.arange(N // 2, N)            # z >= 0
        mirror = N - 1 - up
        Lh = L[np.ix_(up, up)] + L[np.ix_(up, mirror)]
        self_pair = mirror == up             # the node z = 0 when N is odd
        Lh[:, self_pair] -= L[np.ix_(up, mirror[self_pair])]
        L = Lh
    ev = np.linalg.eigvals(L)
    ev = np.sort(ev.real)
    return ev[:n_modes]


def residual(u, lam, d, p, grid: ZonalGrid):
    """Nodal residual of -(p-2) Delta u + lam u - u^{p-1}."""
    u = np.asarray(u, float)
    return -(p - 2) * grid.laplacian(u) + lam * u - np.abs(u) ** (p - 1)
