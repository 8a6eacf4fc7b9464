import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entroflow.constants import renyi_growth_c0, renyi_growth_c0_sharp
from entroflow.core import InvalidInput, ProblemParams, barenblatt, make_grid
from entroflow.flows import (COLUMNS, FlowConfig, fit_rate, growth_lower_bound,
                             initial_time_layer_check, layer_bound, make_datum,
                             quotient_ode_check, run_free_fd, run_linear,
                             run_rescaled_fp, verify_identity_F)

P3 = ProblemParams(3, m=0.8)
P1 = ProblemParams(1, m=0.75)


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("kw", [dict(scheme="rk4"), dict(dt=-1.0), dict(t_end=0.0),
                                dict(newton_tol=1e-3), dict(record_every=0),
                                dict(scheme="theta_method", theta=0.3)])
def test_config_rejected(kw):
    with pytest.raises(InvalidInput):
        FlowConfig(P3, **kw).validate()


def test_config_steps():
    cfg = FlowConfig(P3, dt=1e-3, t_end=0.25)
    assert cfg.n_steps == 250 and cfg.theta_eff == 1.0
    assert FlowConfig(P3, scheme="theta_method", theta=0.6).theta_eff == 0.6


@given(st.floats(0.1, 10.0), st.floats(0.1, 5.0))
def test_fit_rate_exact_exponential(rate, amp):
    t = np.linspace(0, 3, 31)
    assert fit_rate(t, amp * np.exp(-rate * t)) == pytest.approx(rate, rel=1e-9)


def test_make_datum_seeded():
    g = make_grid(101, 5.0)
    a = make_datum("random", P3, g, seed=3).values
    b = make_datum("random", P3, g, seed=3).values
    c = make_datum("random", P3, g, seed=4).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(InvalidInput):
        make_datum("square", P3, g)


# ---------------------------------------------------------------- free flow

@pytest.fixture(scope="module")
def compact_run():
    g = make_grid(8001, 200.0)
    cfg = FlowConfig(P1, dt=1e-3, t_end=2.0, record_every=10)
    return run_free_fd(make_datum("compact", P1, g), cfg)


def test_barenblatt_snapshot_keeps_G():
    g = make_grid(4001, 30.0)
    run = run_free_fd(make_datum("barenblatt", P3, g), FlowConfig(P3, dt=1e-3, t_end=0.5, record_every=10))
    G = run.column("G")
    assert np.ptp(G) / G[0] < 5e-3
    assert run.mass_drift() < 1e-12


def test_compact_G_monotone(compact_run):
    G = compact_run.column("G")
    assert np.all(np.isfinite(G))
    assert np.all(np.diff(G) <= 0)


def test_compact_mass_conserved(compact_run):
    assert compact_run.mass_drift() < 1e-12


@pytest.mark.parametrize("c0", [renyi_growth_c0, renyi_growth_c0_sharp])
def test_growth_estimate_holds(compact_run, c0):
    run = compact_run
    E, M = run.column("E"), run.records[0].mass
    lb = growth_lower_bound(E[0], run.t, 1, 0.75, c0(1, 0.75, M), "B")
    assert np.all(E >= lb * (1 - 1e-12))


def test_growth_estimate_literal_form_is_inconsistent(compact_run):
    # with E0 inside the bracket instead of E0^{(m-mc)/(1-m)} the bound fails at t = 0
    E0 = compact_run.records[0].E
    a = growth_lower_bound(E0, 0.0, 1, 0.75, 1.0, "A")
    assert a != pytest.approx(E0, rel=1e-3)
    assert growth_lower_bound(E0, 0.0, 1, 0.75, 1.0, "B") == pytest.approx(E0, rel=1e-14)


@pytest.fixture(scope="module")
def identity_runs():
    g = make_grid(4001, 30.0)
    u0 = make_datum("bump", P3, g)
    out = []
    for dt, every in ((1e-3, 1), (5e-4, 2)):
        out.append(run_free_fd(u0, FlowConfig(P3, dt=dt, t_end=0.2, record_every=every)))
    return out


def test_identity_self_convergence(identity_runs):
    a, b = (verify_identity_F(r) for r in identity_runs)
    assert a < 0.02
    assert 1.8 < a / b < 2.2


def test_identity_barenblatt_small():
    g = make_grid(4001, 30.0)
    run = run_free_fd(make_datum("barenblatt", P3, g), FlowConfig(P3, dt=1e-3, t_end=0.1))
    rhs = np.abs(run.column("rhs"))
    assert np.all(rhs < 5e-3 * run.records[0].I_free)


def test_identity_at_m1_drops_second_term():
    Q = ProblemParams(3, m=2 / 3)
    g = make_grid(2001, 30.0)
    run = run_free_fd(make_datum("bump", Q, g), FlowConfig(Q, dt=1e-3, t_end=0.05))
    assert np.all(run.column("rhs_renyi") == 0.0)
    assert np.all(run.column("G") == run.column("I_free"))


def test_identity_needs_fd():
    g = make_grid(201, 10.0)
    v0 = barenblatt(P3, g)
    run = run_rescaled_fp(v0, FlowConfig(P3, dt=0.01, t_end=0.03))
    with pytest.raises(InvalidInput):
        verify_identity_F(run)


# ---------------------------------------------------------------- rescaled flow

def test_barenblatt_stationary():
    g = make_grid(1001, 20.0)
    B = barenblatt(P3, g)
    run = run_rescaled_fp(B, FlowConfig(P3, dt=1e-2, t_end=0.5))
    assert np.all(run.column("F") < 1e-28)
    assert np.all(run.column("sandwich_eps") < 1e-12)
    assert run.empirical_T_star == 0.0


def test_rfd_rejects_wrong_mass():
    g = make_grid(201, 10.0)
    with pytest.raises(InvalidInput):
        run_rescaled_fp(barenblatt(P3, g) * 2.0, FlowConfig(P3))


def test_entropy_decay_bound(rfd_runs):
    for kind, (v0, run) in rfd_runs.items():
        F, t = run.column("F"), run.t
        assert np.all(F <= F[0] * np.exp(-4 * t) * (1 + 1e-9)), kind
        assert run.mass_drift() < 1e-12


def test_entropy_rate_matches_gap(rfd_runs):
    # radial data see the level-1 gap 4(2 - d(1-m)) = 5.6
    for kind, (_, run) in rfd_runs.items():
        assert run.fitted_rates["entropy_decay"] == pytest.approx(5.6, abs=0.15), kind


def test_quotient_inequality(rfd_runs):
    for kind, (_, run) in rfd_runs.items():
        # the ring starts within 5% of its plateau, so use a tighter cut
        _, viol = quotient_ode_check(run, plateau_tol=0.01)
        assert viol <= 0.0, kind


def test_csv_columns(rfd_runs, tmp_path):
    _, run = rfd_runs["ring"]
    path = tmp_path / "run.csv"
    run.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == len(run.records) + 1


def test_layer_bound_values():
    assert layer_bound(0.0, 0.7) == pytest.approx(4.7, rel=1e-15)
    e = math.exp(-1.0)
    assert layer_bound(0.25, 1.0) == pytest.approx(4 + 4 * e / (5 - e), rel=1e-15)
    assert layer_bound(0.25, 1.0) == pytest.approx(4.317677, abs=1e-6)


@given(st.floats(0.01, 5.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_layer_bound_decreasing(eta, T1, T2):
    if T1 < T2 - 1e-9:
        assert layer_bound(T1, eta) > layer_bound(T2, eta)


def test_initial_layer(rfd_runs):
    for kind, (_, run) in rfd_runs.items():
        t, Q = run.t, run.column("Q")
        j = int(np.argmin(np.abs(t - 1.0)))
        eta = Q[j] - 4 - 1e-9
        assert initial_time_layer_check(run, t[j], eta) is True, kind


# ---------------------------------------------------------------- linear flows

def test_heat_nash_exponent():
    cfg = FlowConfig(ProblemParams(1), dt=0.01, t_end=60.0)
    run = run_linear("heat", lambda x: np.exp(-x * x), cfg, mesh=4001, length=400.0)
    assert run.fitted_rates["l2_exponent"] == pytest.approx(-0.5, abs=0.01)
    assert run.mass_drift() < 1e-12


@pytest.fixture(scope="module")
def ou_run():
    cfg = FlowConfig(ProblemParams(1), dt=1e-3, t_end=4.0)
    return run_linear("ou", lambda x: 1 + 0.5 * np.tanh(x) + 0.3 * np.exp(-x * x),
                      cfg, lambda x: 0.5 * x * x)


def test_ou_variance_rate(ou_run):
    assert ou_run.fitted_rates["variance_decay"] == pytest.approx(2.0, abs=0.02)


def test_ou_entropy_rate(ou_run):
    assert ou_run.fitted_rates["entropy_decay"] == pytest.approx(2.0, abs=0.02)


def test_ou_variance_bound(ou_run):
    E, t = ou_run.column("E"), ou_run.t
    assert np.all(E <= E[0] * np.exp(-2 * t) * (1 + 1e-9))


def test_linear_rejects():
    cfg = FlowConfig(ProblemParams(1))
    with pytest.raises(InvalidInput):
        run_linear("ou", lambda x: x, cfg)
    with pytest.raises(InvalidInput):
        run_linear("wave", lambda x: x, cfg)
