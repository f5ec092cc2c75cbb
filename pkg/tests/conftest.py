import warnings

import pytest

from cascade.device import TWO_PI, DeviceParams, PumpConfig, solve_constraints
from cascade.rwa import effective_coefficients

DESIGN_HZ = dict(chi_aa=312.0, chi_bb=200e6, chi_ab=0.5e6, Delta=50e6)


def design(g3_hz=460e3, Gamma_1_hz=0.0, Gamma_fg_hz=0.0):
    """Design-point device, pumps and closed-form coefficients."""
    c = {k: TWO_PI * v for k, v in DESIGN_HZ.items()}
    sol = solve_constraints(c["chi_aa"], c["chi_bb"], c["Delta"], TWO_PI * 2e6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = DeviceParams(**c, delta=sol.delta, Gamma_1=TWO_PI * Gamma_1_hz, Gamma_fg_eng=TWO_PI * Gamma_fg_hz)
    pumps = PumpConfig(sol.g1, TWO_PI * 2e6, TWO_PI * g3_hz)
    return params, pumps, effective_coefficients(params, pumps)


@pytest.fixture
def white():
    return design(Gamma_1_hz=2e6)


@pytest.fixture
def engineered():
    return design(Gamma_1_hz=3e3, Gamma_fg_hz=4e6)



def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
