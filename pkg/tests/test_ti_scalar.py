import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flexenv.envelope import EnvelopeKind
from flexenv.model import Trajectory, check_state_feasibility, discretize, simulate
from flexenv.td import compute_td_envelope
from flexenv.ti_scalar import (
    compute_ti_scalar_envelope,
    lower_weights,
    ti_from_td_trajectories,
    upper_weights,
    weighted_energy_lower,
    weighted_energy_upper,
)

from conftest import DT, integrator

A_SWISS = -2.5e-6


@pytest.fixture(scope="module")
def envelopes(swiss_zoh):
    dsys, d = swiss_zoh
    return compute_td_envelope(dsys, d), compute_ti_scalar_envelope(dsys, d)


def test_weights_shape_and_range():
    a = math.exp(A_SWISS * DT)
    up = upper_weights(a, 5)
    dn = lower_weights(a, 5)
    assert up[-1] == 1.0 and np.all(np.diff(up) > 0) and np.all(up <= 1.0)
    assert dn[0] == 1.0 and np.all(dn >= 1.0)


@pytest.mark.parametrize("k", [0, 1, 7])
def test_lossless_weights_give_plain_energy(k):
    p = Trajectory(60.0, np.arange(10, dtype=float)[:, None])
    plain = float(np.sum(p.values[:k, 0]) * 60.0)
    assert weighted_energy_upper(p, [[0.0]], k) == pytest.approx(plain)
    assert weighted_energy_lower(p, [[0.0]], k) == pytest.approx(plain)


def test_upper_closed_form_one_hour():
    p = Trajectory.constant(DT, 4, [1000.0])
    continuous = 1000.0 * (1 - math.exp(A_SWISS * 3600)) / 2.5e-6
    assert continuous == pytest.approx(3.5839e6, rel=1e-4)
    assert weighted_energy_upper(p, [[A_SWISS]], 4) == pytest.approx(continuous, rel=5e-3)


def test_lower_closed_form_one_day():
    p = Trajectory.constant(DT, 96, [600.0])
    continuous = 600.0 * (math.exp(2.5e-6 * 86400) - 1) / 2.5e-6
    assert continuous == pytest.approx(57.87e6, rel=1e-3)
    assert math.exp(0.216) == pytest.approx(1.2411, abs=1e-4)
    assert weighted_energy_lower(p, [[A_SWISS]], 96) == pytest.approx(continuous, rel=5e-3)


def test_discrete_weights_converge_to_continuous():
    errs = []
    for dt in (900.0, 450.0, 225.0):
        K = int(3600 / dt)
        p = Trajectory.constant(dt, K, [1000.0])
        exact = 1000.0 * (1 - math.exp(A_SWISS * 3600)) / 2.5e-6
        errs.append(abs(weighted_energy_upper(p, [[A_SWISS]], K) - exact))
    assert errs[0] > errs[1] > errs[2]


def test_weighted_energy_rejects_multi_input():
    p = Trajectory(1.0, np.ones((3, 2)))
    with pytest.raises(ValueError):
        weighted_energy_upper(p, [[0.0]], 2)
    with pytest.raises(ValueError):
        weighted_energy_lower(Trajectory(1.0, np.ones((3, 1))), np.zeros((2, 2)), 2)


def test_one_hour_ti_below_td(envelopes):
    td, ti = envelopes
    E_ti = ti.envelope.E_up[4]
    assert E_ti == pytest.approx(3.584e6, rel=2e-3)
    assert E_ti < td.envelope.E_up[4] == pytest.approx(3.6e6)


def test_ti_nested_in_td(envelopes):
    td, ti = envelopes
    assert np.all(ti.envelope.E_up <= td.envelope.E_up + 1e-6)
    assert np.all(ti.envelope.E_down >= td.envelope.E_down - 1e-6)
    assert ti.envelope.kind is EnvelopeKind.TI_SCALAR
    assert ti.envelope.defined_up_to == 96


def test_lower_bound_drifts_above_td(envelopes):
    td, ti = envelopes
    gap = ti.envelope.E_down - td.envelope.E_down
    assert gap[-1] > gap[48] > 0


def test_comparison_trajectories_are_feasible(swiss_zoh, envelopes):
    dsys, d = swiss_zoh
    _, ti = envelopes
    for p in (ti.p_plus, ti.p_minus):
        xs = simulate(dsys, Trajectory(DT, p), d)
        assert check_state_feasibility(xs, dsys.source).feasible


@pytest.mark.parametrize("scheme", ["ExactZOH", "ForwardEuler"])
def test_lossless_ti_equals_td(scheme):
    dsys = discretize(integrator(p_max=2.0, x_max=30.0), 5.0, scheme)
    td = compute_td_envelope(dsys, None, 8).envelope
    ti = compute_ti_scalar_envelope(dsys, None, 8).envelope
    assert np.allclose(td.E_up, ti.E_up) and np.allclose(td.E_down, ti.E_down)


def test_from_td_mode_is_inside_optimised_envelope(swiss_zoh, envelopes):
    dsys, d = swiss_zoh
    _, ti = envelopes
    alt = ti_from_td_trajectories(dsys, d)
    assert alt.label == "from_td"
    k = alt.defined_up_to
    assert np.all(alt.E_up[: k + 1] <= ti.envelope.E_up[: k + 1] + 1e-6)
    assert np.all(alt.E_down[: k + 1] >= ti.envelope.E_down[: k + 1] - 1e-6)


def test_rejects_multi_state():
    dsys = discretize(integrator(n=2), 1.0)
    with pytest.raises(ValueError):
        compute_ti_scalar_envelope(dsys, None, 2)


@given(st.floats(-1e-3, 0.0), st.integers(1, 30))
def test_bounds_bracket_plain_energy(A, k):
    """Weights lie in (0,1] for the upper bound and >= 1 for the lower one."""
    p = Trajectory(10.0, np.linspace(0, 5, 30)[:, None])
    plain = float(np.sum(p.values[:k, 0]) * 10.0)
    assert weighted_energy_upper(p, [[A]], k) <= plain + 1e-9
    assert weighted_energy_lower(p, [[A]], k) >= plain - 1e-9
