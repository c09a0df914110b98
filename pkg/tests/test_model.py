import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexenv.model import (
    LinearLossySystem,
    StabilityError,
    StructureError,
    StateTrajectory,
    Trajectory,
    check_state_feasibility,
    discretize,
    matrix_exponential,
    simulate,
    validate_system,
)

from conftest import DT, const, integrator, random_metzler


def scalar(A, B=1.0, x0=0.5):
    return LinearLossySystem(A=[[A]], B_p=[[B]], B_d=np.zeros((1, 0)), p_min=[0], p_max=[1],
                             x_min=[0], x_max=[1], x0=[x0])


# -- validation ------------------------------------------------------------


def test_swiss_house_is_valid(swiss):
    sysm, _ = swiss
    assert validate_system(sysm) == []
    assert sysm.A[0, 0] == pytest.approx(-2.5e-6)
    assert sysm.B_p[0, 0] == pytest.approx(5e-8)


@pytest.mark.parametrize(
    "A, expected",
    [
        ([[1.0]], "diagonal positive at (0,0)"),
        ([[-1, -0.1], [0.2, -1]], "off-diagonal negative at (0,1)"),
    ],
)
def test_validate_reports_sign_violations(A, expected):
    n = len(A)
    sysm = LinearLossySystem(A=A, B_p=np.eye(n), B_d=np.zeros((n, 0)), p_min=np.zeros(n), p_max=np.ones(n),
                             x_min=np.zeros(n), x_max=np.ones(n), x0=np.full(n, 0.5))
    assert expected in validate_system(sysm)


def test_validate_reports_bounds():
    sysm = LinearLossySystem(A=[[-1]], B_p=[[-1]], B_d=np.zeros((1, 0)), p_min=[2], p_max=[1],
                             x_min=[0], x_max=[1], x0=[3])
    report = validate_system(sysm)
    assert "B_p negative at (0,0)" in report
    assert "p_min exceeds p_max at 0" in report
    assert "x0 outside state bounds at 0" in report


def test_dimension_mismatch_is_structural():
    with pytest.raises(StructureError):
        LinearLossySystem(A=[[1, 0]], B_p=[[1]], B_d=[], p_min=[0], p_max=[1], x_min=[0], x_max=[1], x0=[0])
    with pytest.raises(StructureError):
        LinearLossySystem(A=[[-1]], B_p=[[1], [1]], B_d=[], p_min=[0], p_max=[1], x_min=[0], x_max=[1], x0=[0])


def test_json_round_trip(tmp_path, swiss):
    sysm, _ = swiss
    sysm.dump(tmp_path / "m.json")
    back = LinearLossySystem.load(tmp_path / "m.json")
    assert np.array_equal(back.A, sysm.A) and np.array_equal(back.B_d, sysm.B_d)
    assert back.state_labels == sysm.state_labels
    assert "units" in sysm.to_dict()


# -- matrix exponential ----------------------------------------------------


@pytest.mark.parametrize("n", [1, 3])
def test_expm_of_zero_is_identity(n):
    assert np.array_equal(matrix_exponential(np.zeros((n, n)), 3600.0), np.eye(n))


def test_expm_scalar_fixture():
    assert matrix_exponential([[-2.5e-6]], 3600.0)[0, 0] == pytest.approx(0.991040, abs=1e-6)


def test_expm_two_state_fixture():
    E = matrix_exponential([[-1, 1], [1, -1]], 1.0)
    assert np.allclose(E, [[0.567668, 0.432332], [0.432332, 0.567668]], atol=1e-6)


def test_expm_rejects_bad_input():
    with pytest.raises(StructureError):
        matrix_exponential(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        matrix_exponential([[-1.0]], -1.0)
    with pytest.raises(ValueError):
        matrix_exponential([[np.nan]])


@given(st.integers(1, 6), st.integers(0, 2**31 - 1), st.floats(0.0, 1e5))
def test_expm_of_metzler_is_nonnegative(n, seed, t):
    A = random_metzler(np.random.default_rng(seed), n)
    assert np.all(matrix_exponential(A, t) >= 0.0)


# -- discretization --------------------------------------------------------


def test_euler_swiss_house(swiss_euler):
    dsys, _ = swiss_euler
    assert dsys.Ad[0, 0] == pytest.approx(0.99775, abs=1e-12)
    assert dsys.Bpd[0, 0] == pytest.approx(4.5e-5, rel=1e-12)


def test_zoh_swiss_house(swiss_zoh):
    dsys, _ = swiss_zoh
    assert dsys.Ad[0, 0] == pytest.approx(math.exp(-0.00225), rel=1e-12)
    assert dsys.Ad[0, 0] == pytest.approx(0.9977525, abs=1e-7)
    # input map: (1 - a) / (-A) * B
    assert dsys.Bpd[0, 0] == pytest.approx((1 - math.exp(-0.00225)) / 2.5e-6 * 5e-8, rel=1e-10)


@pytest.mark.parametrize("scheme", ["ExactZOH", "ForwardEuler"])
def test_lossless_limit(scheme):
    dsys = discretize(integrator(n=2), 60.0, scheme)
    assert np.allclose(dsys.Ad, np.eye(2))
    assert np.allclose(dsys.Bpd, 60.0 * np.eye(2))


def test_euler_stability_guard_names_bound():
    with pytest.raises(StabilityError, match="dt < 0.5"):
        discretize(scalar(-2.0), 1.0, "ForwardEuler")


@given(st.integers(1, 5), st.integers(0, 2**31 - 1), st.floats(1.0, 3600.0))
def test_discrete_matrices_are_nonnegative(n, seed, dt):
    A = random_metzler(np.random.default_rng(seed), n)
    sysm = LinearLossySystem(A=A, B_p=np.eye(n), B_d=np.zeros((n, 0)), p_min=np.zeros(n), p_max=np.ones(n),
                             x_min=np.zeros(n), x_max=np.ones(n), x0=np.zeros(n))
    schemes = ["ExactZOH"] + (["ForwardEuler"] if dt * np.max(-np.diag(A)) < 1 else [])
    for scheme in schemes:
        dsys = discretize(sysm, dt, scheme)
        assert np.all(dsys.Ad >= 0) and np.all(dsys.Bpd >= 0)


# -- simulation ------------------------------------------------------------


def test_free_cooling_crosses_comfort_bound(swiss_zoh):
    dsys, d = swiss_zoh
    xs = simulate(dsys, const(DT, 96, 0.0), d).values[:, 0]
    t_cross = 4e5 * math.log(13 / 12)          # about 32,017 s
    k = int(np.argmax(xs < 22.0))
    assert abs(k * DT - t_cross) <= DT
    t = np.arange(97) * DT
    assert np.allclose(xs, 10 + 13 * np.exp(-t / 4e5), atol=1e-9)


def test_steady_state_hold(swiss_zoh):
    dsys, d = swiss_zoh
    xs = simulate(dsys, const(DT, 96, 600.0), d, x0=[22.0]).values
    assert np.allclose(xs, 22.0, atol=1e-9)


def test_integrator_grows_linearly():
    dsys = discretize(integrator(), 10.0)
    xs = simulate(dsys, const(10.0, 5, 2.0)).values[:, 0]
    assert np.allclose(xs, 20.0 * np.arange(6))


def test_simulation_is_bitwise_deterministic(swiss_zoh):
    dsys, d = swiss_zoh
    p = Trajectory(DT, np.random.default_rng(3).uniform(0, 1000, (96, 1)))
    assert np.array_equal(simulate(dsys, p, d).values, simulate(dsys, p, d).values)


def test_grid_mismatch_is_rejected(swiss_zoh):
    dsys, d = swiss_zoh
    with pytest.raises(StructureError):
        simulate(dsys, const(60.0, 4, 0.0), d)
    with pytest.raises(StructureError):
        simulate(dsys, const(DT, 4, 0.0))


def test_schemes_converge_as_dt_shrinks(swiss):
    sysm, _ = swiss
    devs = []
    T = 86400.0
    for dt in (3600.0, 1800.0, 900.0):
        K = int(T / dt)
        d = Trajectory.constant(dt, K, [5.0, 0.0])
        p = Trajectory(dt, np.where(np.arange(K) * dt < T / 2, 1000.0, 0.0)[:, None])
        a = simulate(discretize(sysm, dt, "ExactZOH"), p, d).values
        b = simulate(discretize(sysm, dt, "ForwardEuler"), p, d).values
        devs.append(np.max(np.abs(a - b)))
    assert devs[0] / devs[1] >= 1.5 and devs[1] / devs[2] >= 1.5


@given(st.integers(0, 2**31 - 1))
def test_scalar_monotonicity(seed):
    rng = np.random.default_rng(seed)
    dsys = discretize(scalar(-1e-4, 1e-3), 60.0)
    p = rng.uniform(0, 1, (20, 1))
    q = p + rng.uniform(0, 0.5, (20, 1))
    xp = simulate(dsys, Trajectory(60.0, p)).values
    xq = simulate(dsys, Trajectory(60.0, q)).values
    assert np.all(xq >= xp - 1e-15)


# -- feasibility verdicts --------------------------------------------------


def test_boundary_states_are_feasible():
    sysm = scalar(-1.0)
    v = check_state_feasibility(StateTrajectory(1.0, np.zeros((4, 1))), sysm)
    assert v.feasible and v.first_violation_step is None


def test_tolerance_edge_is_feasible():
    sysm = scalar(-1.0)
    xs = StateTrajectory(1.0, np.array([[0.5], [1.0 + 1e-6]]))
    assert check_state_feasibility(xs, sysm, tol=1e-6).feasible
    xs = StateTrajectory(1.0, np.array([[0.5], [1.0 + 1e-3]]))
    v = check_state_feasibility(xs, sysm, tol=1e-6)
    assert not v.feasible and v.first_violation_step == 1
    assert v.worst_over[0] == pytest.approx(1e-3)
