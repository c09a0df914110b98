"""Trajectory-independent envelope for one-state systems.

Power is weighted by how strongly it still affects the state at the lead
time.  With step transition ``a = exp(A dt)`` (or ``1 + A dt`` under forward
Euler) the state at step k depends on power at step l < k through
``a**(k-1-l)``.  The upper bound weights by ``a**(k-1-l)`` (largest weight 1,
at the most recent step); the lower bound divides by the smallest weight,
``a**(k-1)``, which gives ``a**(-l)``.  Both collapse to plain energy when
``A = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envelope import EnvelopeKind, EnvelopeSeries, defined_horizon
from .model import DiscreteSystem, Trajectory
from .td import _sweep, compute_td_envelope


def _scalar(A) -> float:
    arr = np.asarray(A, dtype=float)
    if arr.size != 1:
        raise ValueError("weighted energies are defined for one-state systems")
    return float(arr.reshape(-1)[0])


def _step_factor(A, dt: float, step_factor: float | None) -> float:
    return math.exp(_scalar(A) * dt) if step_factor is None else float(step_factor)


def upper_weights(a: float, k: int) -> np.ndarray:
    return a ** np.arange(k - 1, -1, -1, dtype=float)


def lower_weights(a: float, k: int) -> np.ndarray:
    return a ** -np.arange(k, dtype=float)


def weighted_energy_upper(p: Trajectory, A, k: int, step_factor: float | None = None) -> float:
    """Sum over l < k of a**(k-1-l) * p_l * dt."""
    if p.dim != 1:
        raise ValueError("weighted energies are defined for one power input")
    if k == 0:
        return 0.0
    a = _step_factor(A, p.dt, step_factor)
    return float(upper_weights(a, k) @ p.values[:k, 0] * p.dt)


def weighted_energy_lower(p: Trajectory, A, k: int, step_factor: float | None = None) -> float:
    """Sum over l < k of a**(-l) * p_l * dt."""
    if p.dim != 1:
        raise ValueError("weighted energies are defined for one power input")
    if k == 0:
        return 0.0
    a = _step_factor(A, p.dt, step_factor)
    return float(lower_weights(a, k) @ p.values[:k, 0] * p.dt)


@dataclass
class TIScalarResult:
    envelope: EnvelopeSeries
    p_plus: np.ndarray | None
    p_minus: np.ndarray | None


def compute_ti_scalar_envelope(dsys: DiscreteSystem, d: Trajectory | None = None, K: int | None = None, workers: int = 1) -> TIScalarResult:
    """One weighted-energy LP pair per lead time, each with its own comparison trajectory."""
    if dsys.state_dim != 1 or dsys.power_dim != 1:
        raise ValueError("scalar TI envelope needs a one-state, one-input system")
    K = dsys.K if K is None else K
    a = float(dsys.Ad[0, 0])

    def weights(k):
        return (upper_weights(a, k) * dsys.dt)[:, None], (lower_weights(a, k) * dsys.dt)[:, None]

    E_down, E_up, infeasible, p_up, p_dn = _sweep(dsys, d, K, weights, workers)
    env = EnvelopeSeries(
        dsys.dt, E_down, E_up, EnvelopeKind.TI_SCALAR,
        defined_horizon(E_down, E_up), infeasible_step=infeasible,
    )
    return TIScalarResult(env, p_up, p_dn)


def ti_from_td_trajectories(dsys: DiscreteSystem, d: Trajectory | None = None, K: int | None = None) -> EnvelopeSeries:
    """Comparison mode: weight the full-horizon TD argmax/argmin trajectories instead of optimizing.

    Sound but generally narrower than :func:`compute_ti_scalar_envelope`.
    """
    K = dsys.K if K is None else K
    td = compute_td_envelope(dsys, d, K)
    a = float(dsys.Ad[0, 0])
    kk = td.envelope.defined_up_to
    E_up = np.full(K + 1, np.nan)
    E_down = np.full(K + 1, np.nan)
    E_up[0] = E_down[0] = 0.0
    if td.p_up is not None:
        p_up = Trajectory(dsys.dt, td.p_up)
        p_dn = Trajectory(dsys.dt, td.p_down)
        for k in range(1, kk + 1):
            E_up[k] = weighted_energy_upper(p_up, None, k, step_factor=a)
            E_down[k] = weighted_energy_lower(p_dn, None, k, step_factor=a)
    return EnvelopeSeries(dsys.dt, E_down, E_up, EnvelopeKind.TI_SCALAR, defined_horizon(E_down, E_up), label="from_td")
