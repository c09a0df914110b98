import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flexenv.model import LinearLossySystem, Trajectory, discretize
from flexenv.rc import compile_network, constant_ambient, swiss_house

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DT = 900.0
K_DAY = 96


@pytest.fixture(scope="session")
def swiss():
    """SwissHouse compiled at dt = 900 s over 24 h with 10 degC ambient."""
    sysm, d = compile_network(swiss_house(), constant_ambient(10.0, DT, K_DAY), K_DAY)
    return sysm, d


@pytest.fixture(scope="session")
def swiss_zoh(swiss):
    sysm, d = swiss
    return discretize(sysm, DT, "ExactZOH", K_DAY), d


@pytest.fixture(scope="session")
def swiss_euler(swiss):
    sysm, d = swiss
    return discretize(sysm, DT, "ForwardEuler", K_DAY), d


def integrator(p_max=1.0, x_max=1e9, n=1):
    """Lossless system dx/dt = p, no disturbance."""
    return LinearLossySystem(
        A=np.zeros((n, n)), B_p=np.eye(n), B_d=np.zeros((n, 0)),
        p_min=np.zeros(n), p_max=np.full(n, p_max),
        x_min=np.zeros(n), x_max=np.full(n, x_max), x0=np.zeros(n),
    )


def random_metzler(rng, n, scale=1e-4):
    A = rng.uniform(0, scale, size=(n, n))
    np.fill_diagonal(A, 0.0)
    A -= np.diag(A.sum(axis=1) + rng.uniform(0, scale, size=n))
    return A


def const(dt, K, value):
    return Trajectory.constant(dt, K, value)


# -- acceptance reporting --------------------------------------------------

ACCEPTANCE: dict = {}


def record_criterion(number: int, passed: bool, detail: str, seconds: float, limit: float | None = None) -> bool:
    """Store and print one acceptance verdict; the runtime limit is part of the verdict."""
    timed_ok = limit is None or seconds <= limit
    ok = bool(passed and timed_ok)
    budget = f" (limit {limit:g} s)" if limit is not None else ""
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} -- {detail}; {seconds:.1f} s{budget}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
