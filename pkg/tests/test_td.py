import math

import numpy as np
import pytest

from flexenv.envelope import EnvelopeKind, EnvelopeSeries, defined_horizon
from flexenv.model import Trajectory, check_state_feasibility, discretize, simulate
from flexenv.rc import compile_network, constant_ambient, one_zone
from flexenv.td import compute_td_envelope, greedy_extreme, greedy_td_check

from conftest import DT, integrator

T_KINK = 4e5 * math.log(7.0 / 6.0)    # 23 degC -> 24 degC at full power, heading for 30 degC
T_COOL = 4e5 * math.log(13.0 / 12.0)  # 23 degC -> 22 degC with no power


@pytest.fixture(scope="module")
def td_zoh(swiss_zoh):
    dsys, d = swiss_zoh
    return compute_td_envelope(dsys, d)


def test_kink_constants():
    assert T_KINK == pytest.approx(61660, abs=10)
    assert T_COOL == pytest.approx(32017, abs=1)


def test_one_hour_upper_bound(td_zoh):
    assert td_zoh.envelope.E_up[4] == pytest.approx(3.6e6, rel=1e-9)


def test_upper_bound_kink_and_slope(td_zoh):
    E = td_zoh.envelope.E_up
    slopes = np.diff(E) / DT
    full = np.nonzero(slopes < 1000.0 - 1e-6)[0]
    assert abs(full[0] * DT - T_KINK) <= DT
    assert slopes[-1] == pytest.approx(700.0, rel=1e-3)
    # increments are nonincreasing once the upper bound binds
    assert np.all(np.diff(slopes[full[0]:]) <= 1e-6)


def test_lower_bound_start_and_slope(td_zoh):
    E = td_zoh.envelope.E_down
    first = int(np.argmax(E > 1e-6))
    assert abs((first - 1) * DT - T_COOL) <= DT
    assert np.all(np.abs(E[:first]) <= 1e-6)
    assert (E[-1] - E[-2]) / DT == pytest.approx(600.0, rel=1e-2)


def test_envelope_invariants(td_zoh):
    env = td_zoh.envelope
    assert env.kind is EnvelopeKind.TD
    assert env.defined_up_to == 96 and env.infeasible_step is None
    assert env.E_up[0] == env.E_down[0] == 0.0
    assert np.all(np.diff(env.E_up) >= -1e-6) and np.all(np.diff(env.E_down) >= -1e-6)
    assert np.all(env.E_down <= env.E_up + 1e-6)


def test_argmax_trajectories_are_feasible(swiss_zoh, td_zoh):
    dsys, d = swiss_zoh
    for p in (td_zoh.p_up, td_zoh.p_down):
        xs = simulate(dsys, Trajectory(DT, p), d)
        assert check_state_feasibility(xs, dsys.source, tol=1e-6).feasible


def test_greedy_matches_lp(swiss_zoh, td_zoh):
    dsys, d = swiss_zoh
    dev = greedy_td_check(dsys, d, td_zoh.envelope)
    assert dev["upper"] <= 1e-6 and dev["lower"] <= 1e-6


def test_euler_kink_within_two_percent(swiss_euler):
    dsys, d = swiss_euler
    env = compute_td_envelope(dsys, d).envelope
    slopes = np.diff(env.E_up) / DT
    kink = np.nonzero(slopes < 1000.0 - 1e-6)[0][0] * DT
    assert abs(kink - T_KINK) / T_KINK <= 0.02
    t = np.arange(97) * DT
    closed = np.where(t <= T_KINK, 1000.0 * t, 1000.0 * T_KINK + 700.0 * (t - T_KINK))
    assert np.max(np.abs(env.E_up - closed)) / closed[-1] <= 0.02


def test_lossless_upper_bound_is_power_limit():
    dsys = discretize(integrator(p_max=3.0, n=2), 10.0)
    env = compute_td_envelope(dsys, None, 5).envelope
    assert np.allclose(env.E_up, 10.0 * 6.0 * np.arange(6))
    assert np.allclose(env.E_down, 0.0)
    p = greedy_extreme(discretize(integrator(p_max=3.0), 10.0), None, 5, True)
    assert np.allclose(p, 3.0)


def test_lossless_greedy_is_exact():
    dsys = discretize(integrator(p_max=2.0, x_max=50.0), 10.0)
    env = compute_td_envelope(dsys, None, 6).envelope
    assert greedy_td_check(dsys, None, env) == {"upper": pytest.approx(0.0, abs=1e-12), "lower": pytest.approx(0.0, abs=1e-12)}
    assert env.E_up[-1] == pytest.approx(50.0)


def test_infeasible_band_truncates():
    # 100 W cannot hold 22 degC against a 10 degC ambient (needs 600 W)
    sysm, d = compile_network(one_zone(20e6, 50.0, 100.0), constant_ambient(10.0, DT, 96), 96)
    env = compute_td_envelope(discretize(sysm, DT, K=96), d).envelope
    assert env.infeasible_step is not None
    assert env.defined_up_to == env.infeasible_step - 1
    assert np.all(np.isnan(env.E_up[env.infeasible_step:]))
    # the first infeasible step is where even full power no longer keeps 22 degC
    xs = simulate(discretize(sysm, DT), Trajectory.constant(DT, 96, [100.0]), d).values[:, 0]
    assert env.infeasible_step == int(np.argmax(xs < 22.0))


def test_workers_do_not_change_results(swiss_zoh):
    dsys, d = swiss_zoh
    a = compute_td_envelope(dsys, d, 24, workers=1).envelope
    b = compute_td_envelope(dsys, d, 24, workers=3).envelope
    assert np.array_equal(a.E_up, b.E_up) and np.array_equal(a.E_down, b.E_down)


def test_greedy_rejects_multi_state():
    dsys = discretize(integrator(n=2), 1.0)
    env = compute_td_envelope(dsys, None, 2).envelope
    with pytest.raises(ValueError):
        greedy_td_check(dsys, None, env)


def test_csv_round_trip(tmp_path, td_zoh):
    env = td_zoh.envelope
    text = env.to_csv(tmp_path / "e.csv")
    lines = text.splitlines()
    assert lines[0] == "# kind=TD dt=900 defined_up_to=96"
    assert lines[1] == "step,time_s,E_down_J,E_up_J"
    assert len(lines) == 2 + 97
    back = EnvelopeSeries.from_csv(tmp_path / "e.csv")
    assert np.allclose(back.E_up, env.E_up, rtol=1e-9) and back.kind is EnvelopeKind.TD


@pytest.mark.parametrize(
    "down, up, expected",
    [
        ([0, 1, 2], [0, 2, 3], 2),
        ([0, 1, 3], [0, 2, 2.5], 1),
        ([0, np.nan, 1], [0, 1, 2], 0),
    ],
)
def test_defined_horizon(down, up, expected):
    assert defined_horizon(np.array(down, float), np.array(up, float)) == expected


def test_width_is_clipped_and_truncated():
    env = EnvelopeSeries(1.0, [0, 1, 3, 0], [0, 2, 2, 5], EnvelopeKind.TI_SCALAR, 1)
    assert list(env.width()) == [0, 1, 0, 0]
