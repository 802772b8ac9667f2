import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (K3 [1e-41 m^6/s], tau_cool, tau_N, tau_f, f0, T [nK], N0 [1e4], Tc [nK]) as (value, sigma)
FITTED_ROWS = {
    "1": dict(k3=(3.6, 0.4), tau_cool=(62, 12), tau_n=(17.5, 0.5), tau_f=(96, 9), f0=(0.76, 0.01), T=(21, 0.6), n0=(7.0, 0.2), tc=44),
    "2": dict(k3=(2.1, 0.6), tau_cool=(43, 4), tau_n=(28, 1), tau_f=(383, 205), f0=(0.75, 0.02), T=(16, 0.5), n0=(8.3, 0.1), tc=33),
    "3": dict(k3=(3.2, 0.1), tau_cool=(67, 2), tau_n=(17.2, 0.1), tau_f=(61, 4), f0=(0.71, 0.02), T=(25, 0.6), n0=(8.2, 0.1), tc=50),
    "4": dict(k3=(3.5, 0.4), tau_cool=(75, 10), tau_n=(24, 1), tau_f=(203, 31), f0=(0.82, 0.01), T=(15, 0.4), n0=(9.0, 0.3), tc=36),
}

# energy budget per trap (nK/s): (value, printed tolerance); background has no printed
# uncertainty and is checked to +-0.02
BUDGET_ROWS = {
    "1": dict(du=(-1.4, 0.1), cool=(-2.8, 0.6), tbr=(0.57, 0.06), bg=(-0.08, 0.02), w=(-2.3, 0.7), r_in=(0.9, 0.7)),
    "2": dict(du=(-0.8, 0.1), cool=(-2.1, 0.2), tbr=(0.28, 0.02), bg=(-0.06, 0.02), w=(-1.9, 0.2), r_in=(1.1, 0.2)),
    "3": dict(du=(-1.6, 0.1), cool=(-2.6, 0.1), tbr=(0.84, 0.03), bg=(-0.10, 0.02), w=(-1.9, 0.1), r_in=(0.3, 0.2)),
    "4": dict(du=(-0.8, 0.1), cool=(-1.2, 0.2), tbr=(0.23, 0.02), bg=(-0.05, 0.02), w=(-1.0, 0.2), r_in=(0.2, 0.2)),
}


def audit_input(name, **kw):
    from cslheat.audit import AuditInput
    from cslheat.core import preset_trap

    r = FITTED_ROWS[name]
    fitted = dict(
        n0=(r["n0"][0] * 1e4, r["n0"][1] * 1e4),
        f0=r["f0"],
        tau_n=r["tau_n"],
        tau_f=r["tau_f"],
        tau_cool=r["tau_cool"],
        k3c=(r["k3"][0] * 1e-41, r["k3"][1] * 1e-41),
    )
    return AuditInput(preset_trap(name), fitted, name=name, **kw)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""

    def record(number, ok, detail):
        _ACCEPTANCE.append((number, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
