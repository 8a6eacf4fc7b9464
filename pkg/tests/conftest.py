import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entroflow.core import ProblemParams, make_grid
from entroflow.flows import FlowConfig, make_datum, normalize_mass, run_rescaled_fp

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

RFD_PARAMS = ProblemParams(3, m=0.8)
RFD_DATA = ("ring", "random", "bump")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def rfd_runs():
    """Rescaled-flow runs (d=3, m=0.8) from three data with the Barenblatt mass."""
    grid = make_grid(2001, 20.0)
    cfg = FlowConfig(RFD_PARAMS, dt=1e-3, t_end=2.0, record_every=10)
    out = {}
    for kind in RFD_DATA:
        v0 = normalize_mass(make_datum(kind, RFD_PARAMS, grid, seed=1), RFD_PARAMS)
        out[kind] = (v0, run_rescaled_fp(v0, cfg))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
