"""Closed-form constants, exponents and symmetry classifiers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, fields

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .core import CknParams, InvalidInput, sphere_area


def sobolev_constant(d: int, form: str = "gamma") -> float:
    """Sharp Sobolev constant S_d, in one of three equivalent closed forms."""
    if d < 3:
        raise InvalidInput("S_d is defined for d >= 3")
    if form == "gamma":
        ratio = math.exp(gammaln(d / 2.0) - gammaln(float(d)))
        return math.pi * d * (d - 2) * ratio ** (2.0 / d)
    if form == "half":
        g = math.exp(gammaln((d + 1) / 2.0))
        return 0.25 * d * (d - 2) * 2 ** (2.0 / d) * math.pi ** (1 + 1.0 / d) / g ** (2.0 / d)
    if form == "sphere":
        return 0.25 * d * (d - 2) * sphere_area(d + 1) ** (2.0 / d)
    raise InvalidInput(f"unknown form {form!r}")


@dataclass(frozen=True)
class SphereExponents:
    two_sharp: float
    gamma_p: float
    theta: float


def sphere_exponents(d: int, p: float) -> SphereExponents:
    """2^#, gamma(p) and the GNS interpolation exponent theta."""
    if d < 1:
        raise InvalidInput("d must be positive")
    if d == 1:
        two_sharp = math.inf
        gamma_p = (p - 1) / 3.0
    else:
        two_sharp = (2.0 * d * d + 1) / (d - 1) ** 2
        gamma_p = ((d - 1.0) / (d + 2)) ** 2 * (p - 1) * (two_sharp - p)
    denom = (d + 2 - p * (d - 2)) * p
    theta = d * (p - 1) / denom if denom != 0 else math.nan
    return SphereExponents(two_sharp, gamma_p, theta)


def sphere_delta(d: int, p: float, m: float) -> float:
    """delta(beta) with beta = 2/(2 - p(1-m)) and kappa = beta(p-2)+1."""
    den = 2 - p * (1 - m)
    if den <= 0:
        raise InvalidInput("2 - p(1-m) must be positive")
    beta = 2.0 / den
    kappa = beta * (p - 2) + 1
    s = kappa + beta - 1
    return -((d - 1.0) / (d + 2) * s) ** 2 + kappa * (beta - 1) + d / (d + 2.0) * s


@dataclass(frozen=True)
class RegimeVerdict:
    region: str            # "symmetry" or "breaking"
    boundary_value: float
    margin: float          # signed distance into the symmetry region


def b_fs(d, a):
    ac = (d - 2) / 2.0
    t = ac - a
    return d * t / (2 * math.sqrt(t * t + d - 1)) + a - ac


def beta_fs(d, gamma):
    disc = (gamma - d) ** 2 - 4 * (d - 1)
    if disc < 0:
        # no real boundary: the whole admissible strip is symmetric
        return math.inf
    return d - 2 - math.sqrt(disc)


def felli_schneider(params, family: str = "critical") -> RegimeVerdict:
    """Classify a parameter point against the symmetry-breaking curve.

    critical: params is CknParams; symmetry iff b >= b_FS(a).
    subcritical: params is a (d, beta, gamma) tuple; symmetry iff beta <= beta_FS(gamma).
    """
    if family == "critical":
        if not isinstance(params, CknParams):
            raise InvalidInput("critical family takes CknParams")
        bf = b_fs(params.d, params.a)
        margin = params.b - bf
        return RegimeVerdict("symmetry" if margin >= 0 else "breaking", bf, margin)
    if family == "subcritical":
        d, beta, gamma = params
        if not (d >= 2 and gamma - 2 < beta < (d - 2) * gamma / d):
            raise InvalidInput("need gamma-2 < beta < (d-2) gamma/d")
        bf = beta_fs(d, gamma)
        margin = bf - beta
        return RegimeVerdict("symmetry" if margin >= 0 else "breaking", bf, margin)
    raise InvalidInput(f"unknown family {family!r}")


def alpha_fs(d: int, n: float) -> float:
    if not n > 1:
        raise InvalidInput("n must exceed 1")
    return math.sqrt((d - 1.0) / (n - 1.0))


def ckn_alpha_n(ckn: CknParams):
    """Exponents (alpha, n) of the change of variables r -> r^alpha."""
    ac, a, b = ckn.a_c, ckn.a, ckn.b
    if ac - a + b == 0:
        raise InvalidInput("alpha undefined for a_c - a + b = 0")
    alpha = (1 + a - b) * (ac - a) / (ac - a + b)
    p = ckn.p
    if p <= 2:
        raise InvalidInput("the (alpha, n) map needs p > 2")
    return alpha, 2 * p / (p - 2)


def classify_alpha(ckn: CknParams) -> RegimeVerdict:
    """Second route: symmetry iff alpha <= alpha_FS(n)."""
    alpha, n = ckn_alpha_n(ckn)
    af = alpha_fs(ckn.d, n)
    margin = af - alpha
    return RegimeVerdict("symmetry" if margin >= 0 else "breaking", af, margin)


def radial_integral(fun, n, lower=0.0):
    """|S^{n-1}| int_lower^inf fun(r) r^{n-1} dr, computed in the log variable."""
    area = sphere_area(n)

    def g(s):
        r = math.exp(s)
        return fun(r) * r ** n

    # power-law ends decay exponentially in s; +-60 is far beyond double range
    lo = -60.0 if lower == 0 else math.log(lower)
    tot = 0.0
    for a, b in ((lo, 0.0), (0.0, 20.0), (20.0, 60.0)):
        if b > a:
            tot += integrate.quad(g, a, b, limit=400, epsabs=0, epsrel=1e-13)[0]
    return area * tot


def gns_optimal_constant(d: int, p: float, grid=None) -> float:
    """C_GNS(p) as the GNS quotient evaluated at (1+r^2)^{-1/(p-1)}.

    With `grid` (a RadialGrid) the integrals use the truncated grid
    quadrature, otherwise adaptive quadrature on (0, inf).
    """
    pstar = d / (d - 2.0) if d > 2 else math.inf
    if not (1 < p <= pstar):
        raise InvalidInput(f"p={p} outside (1, {pstar}]")
    theta = sphere_exponents(d, p).theta
    k = -1.0 / (p - 1)
    g = lambda r: (1 + r * r) ** k
    dg = lambda r: 2 * k * r * (1 + r * r) ** (k - 1)
    if grid is None:
        grad2 = radial_integral(lambda r: dg(r) ** 2, d)
        lp1 = radial_integral(lambda r: g(r) ** (p + 1), d)
        l2p = radial_integral(lambda r: g(r) ** (2 * p), d)
    else:
        r = grid.r
        grad2 = grid.integrate(dg(r) ** 2, d)
        lp1 = grid.integrate(g(r) ** (p + 1), d)
        l2p = grid.integrate(g(r) ** (2 * p), d)
    num = grad2 ** (theta / 2) * lp1 ** ((1 - theta) / (p + 1))
    return num / l2p ** (1.0 / (2 * p))


@dataclass(frozen=True)
class CknConstant:
    value: float               # quadrature at the symmetric optimizer
    formula_value: float
    formula_reliable: bool = False   # set only when both routes agree


def ckn_symmetric_constant(ckn: CknParams) -> CknConstant:
    """C_{a,b} on the symmetric branch: (int g^p r^{-bp})^{2/p} / int |g'|^2 r^{-2a}."""
    p = ckn.p
    if p <= 2:
        raise InvalidInput("needs p > 2 (b < a+1)")
    d, a, b = ckn.d, ckn.a, ckn.b
    q = (p - 2) * (ckn.a_c - a)
    e = -2.0 / (p - 2)
    g = lambda r: (1 + r ** q) ** e
    dg = lambda r: e * q * r ** (q - 1) * (1 + r ** q) ** (e - 1)
    top = radial_integral(lambda r: g(r) ** p * r ** (-b * p), d)
    bot = radial_integral(lambda r: dg(r) ** 2 * r ** (-2 * a), d)
    value = top ** (2.0 / p) / bot
    fv = _ckn_formula(d, a, p)
    return CknConstant(value, fv, abs(fv - value) <= 1e-9 * value)


def _ckn_formula(d, a, p):
    # transcription of the published closed form; not trusted on its own
    ac = (d - 2) / 2.0
    lg = (math.log(p - 2) + gammaln((3 * p - 2) / (2 * (p - 2)))
          - math.log(2 * math.sqrt(math.pi) * sphere_area(d)) - gammaln(p / (p - 2)))
    return (2.0 / p) * (ac - a) ** (-(p + 2) / p) * math.exp(lg * (p - 2) / p)


def _growth_check(d, m):
    m1 = (d - 1.0) / d
    if not (m1 <= m < 1) or m <= 0.5:
        raise InvalidInput(f"need max(m1, 1/2) < m < 1, got m={m}")


def renyi_growth_c0(d: int, m: float, mass: float) -> float:
    """Constant C0 of the entropy growth estimate, as typeset."""
    _growth_check(d, m)
    p = 1.0 / (2 * m - 1)
    c = gns_optimal_constant(d, p)
    e = (d + 2) * m - d
    return (4 * (1 - m) ** 3 / (2 * m - 1) ** 2 * c ** (2.0 / d * e / ((1 - m) * (2 * m - 1)))
            * mass ** (e / (d * (1 - m))))


def renyi_growth_c0_sharp(d: int, m: float, mass: float) -> float:
    """C0 making the growth estimate sharp: (m-mc)^2/(1-m) * inf G at this mass,
    with inf G = (p+1)^2 C_GNS^{2/theta} M^{1/(p theta)}."""
    _growth_check(d, m)
    mc = (d - 2.0) / d
    p = 1.0 / (2 * m - 1)
    theta = sphere_exponents(d, p).theta
    c = gns_optimal_constant(d, p)
    g_inf = (p + 1) ** 2 * c ** (2 / theta) * mass ** (1 / (p * theta))
    return (m - mc) ** 2 / (1 - m) * g_inf


@dataclass
class ThresholdConstants:
    c_star: float = 1.0
    a_exp: float = 1.0
    eps0: float = 0.5
    chi: float = 0.5

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise InvalidInput("threshold config must be a JSON object")
        names = {f.name for f in fields(cls)}
        bad = set(raw) - names
        if bad:
            raise InvalidInput(f"unknown threshold keys: {sorted(bad)}")
        out = cls(**{k: float(v) for k, v in raw.items()})
        out.validate()
        return out

    def validate(self):
        if not (self.c_star > 0 and self.a_exp > 0 and 0 < self.eps0 <= 0.5 and 0 < self.chi < 1):
            raise InvalidInput(f"invalid threshold constants {asdict(self)}")


def threshold_time(d, m, A, G, eps, consts: ThresholdConstants | None = None):
    """Threshold time after which the relative error sits below eps."""
    c = consts or ThresholdConstants()
    c.validate()
    m1, mc = (d - 1.0) / d, (d - 2.0) / d
    if not (m1 < m < 1):
        raise InvalidInput("threshold time needs m1 < m < 1")
    if not (A >= 0 and G >= 0):
        raise InvalidInput("A and G must be non-negative")
    eta = 2 * d * (m - m1)
    hi = min(c.chi * eta, c.eps0)
    if not (0 < eps < hi):
        raise InvalidInput(f"eps={eps} outside the window (0, {hi})")
    alpha = d * (m - mc)
    inner = 1 + A ** (1 - m) + G ** (alpha / 2)
    return math.log1p(alpha * c.c_star * inner / eps ** c.a_exp) / (2 * alpha)


def tail_sup(profile, d, m):
    """A = sup_r r^{d(m-mc)/(1-m)} int_{|x|>r} u, on the profile's grid."""
    mc = (d - 2.0) / d
    w = profile.grid.weights(profile.n)
    tail = np.cumsum((w * profile.values)[::-1])[::-1]
    expo = d * (m - mc) / (1 - m)
    return float(np.max(profile.r ** expo * tail))
