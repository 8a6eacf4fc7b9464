import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entroflow.cli import _branch, _turning_point
from entroflow.core import InvalidInput
from entroflow.sphere.branches import (ContinuationConfig, GaussSystem, bifurcation_value,
                                       constant_branch_bifurcations, continue_branch,
                                       is_concave, mu_of_lambda, pick_branch)
from entroflow.sphere.kappa import kappa_detail, kappa_p
from entroflow.sphere.zonal import ZonalGrid, residual

P_NEAR = 3.3333333


# ---------------------------------------------------------------- zonal residual

@settings(max_examples=20)
@given(st.integers(2, 6), st.floats(2.1, 4.0), st.floats(0.5, 20.0))
def test_constant_solves(d, p, lam):
    if d > 2 and p > 2 * d / (d - 2):
        return
    g = ZonalGrid(d, 32)
    u = np.full(32, lam ** (1 / (p - 2)))
    # transform round-off is amplified by the top eigenvalues of -Delta
    assert np.abs(residual(u, lam, d, p, g)).max() < 1e-8 * u[0] ** (p - 1)


def test_random_u_not_solution():
    g = ZonalGrid(3, 32)
    u = 1 + 0.3 * np.random.default_rng(0).random(32)
    assert np.abs(residual(u, 3.0, 3, 3.0, g)).max() > 1e-3


@pytest.mark.parametrize("d", [2, 3, 5])
def test_laplacian_on_gegenbauer(d):
    g = ZonalGrid(d, 24)
    for k in range(1, 6):
        f = g.P[:, k]
        assert np.allclose(g.laplacian(f), -k * (k + d - 1) * f, atol=1e-10)


# ---------------------------------------------------------------- bifurcations

def test_bifurcations_d3():
    bif = constant_branch_bifurcations(3, 3.0, 9.0)
    assert np.allclose(bif, [3.0, 8.0], atol=1e-9)


def test_bifurcations_d5():
    bif = constant_branch_bifurcations(5, P_NEAR, 13.0)
    assert np.allclose(bif, [5.0, 12.0], atol=1e-9)


def test_bifurcation_value():
    assert bifurcation_value(2, 5) == 12.0


@pytest.mark.parametrize("ell", [1, 2])
def test_branch_leaves_along_mode(ell):
    cfg = ContinuationConfig(ds0=0.02, max_steps=6, signature=False)
    br = continue_branch(ell, 3, 3.0, 1, cfg)
    sys = br.system
    c = br.states[3].copy()
    c[0] = 0.0
    overlap = abs(c[sys.k_mode]) / np.linalg.norm(c)
    assert overlap > 0.95
    assert abs(br.lam[3] - bifurcation_value(ell, 3)) < 0.05 * bifurcation_value(ell, 3)


def test_gauss_system_rejects():
    with pytest.raises(InvalidInput):
        GaussSystem(3, 3.0, 1, antipodal=True)
    with pytest.raises(InvalidInput):
        GaussSystem(3, 7.0, 2)
    with pytest.raises(InvalidInput):
        GaussSystem(3, 2.0, 2)


# ---------------------------------------------------------------- mu(lambda)

@pytest.fixture(scope="module")
def fig1_branch():
    cfg = ContinuationConfig(nodes=64, lam_min=0.0, lam_max=7.0, max_steps=400)
    return pick_branch(1, 3, 3.0, cfg, toward=+1)


def test_mu_before_bifurcation_is_lambda(fig1_branch):
    mu = mu_of_lambda(3, 3.0, [1.5, 2.5], [fig1_branch])
    assert mu[0] == 1.5 and mu[1] == 2.5


def test_mu_below_lambda_after(fig1_branch):
    mu = mu_of_lambda(3, 3.0, [4.0, 5.0], [fig1_branch])
    assert mu[0] < 4.0 and mu[1] < 5.0


def test_mu_concave(fig1_branch):
    lam = np.arange(0.5, 6.0 + 1e-9, 0.25)
    mu = mu_of_lambda(3, 3.0, lam, [fig1_branch])
    assert is_concave(lam, mu)
    assert np.all(mu <= lam)


def test_is_concave_detects():
    x = np.linspace(0, 1, 11)
    assert is_concave(x, -x * x) and not is_concave(x, x * x)


# ---------------------------------------------------------------- turning point, kappa

def test_turning_point_near_critical():
    br = _branch(5, P_NEAR, 2, 1, "cylinder", 0, 40.0, 600, signature=False)
    found, lam_t, mu_t = _turning_point(br)
    assert found
    assert lam_t == pytest.approx(5.005944, abs=1e-5)
    # past the fold lambda climbs again
    assert br.lam[-1] > lam_t + 4.0


def test_turning_point_subcritical():
    br = _branch(5, 3.0, 2, 1, "gauss", 128, 40.0, 400, signature=False)
    found, lam_t, _ = _turning_point(br)
    assert found and lam_t == pytest.approx(7.618, abs=1e-2)


def test_kappa_p1_closed_form():
    assert kappa_p(5, 1.0) == 12.0


def test_kappa_decreasing():
    vals = [kappa_p(5, p) for p in (3.0, 3.2, P_NEAR)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] == pytest.approx(6.5975412458, abs=1e-7)


def test_kappa_two_readouts_agree():
    k = kappa_detail(5, 3.2)
    assert k.attained and k.q2 == pytest.approx(k.value, rel=1e-10)


def test_kappa_critical_limit_bound():
    k = kappa_detail(5, 10 / 3)
    assert not k.attained and k.method == "cylinder-limit"
    assert k.value == pytest.approx(2 ** 0.4 * 5, rel=1e-8)


def test_kappa_rejects():
    with pytest.raises(InvalidInput):
        kappa_p(5, 2.0)
    with pytest.raises(InvalidInput):
        kappa_p(5, 3.0, method="magic")
