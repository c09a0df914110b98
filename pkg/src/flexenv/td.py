"""Trajectory-dependent envelope: extreme cumulative energy per lead time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelope import (
    EnvelopeKind,
    EnvelopeSeries,
    defined_horizon,
    disturbance_forcing,
    map_ordered,
    prefix_block,
)
from .model import DiscreteSystem, Trajectory
from .solvers import LinearProgram, SolveResult, Status, solve_lp


def lead_time_lp(dsys: DiscreteSystem, d: Trajectory | None, k: int, weights: np.ndarray, sense: int) -> tuple[LinearProgram, object]:
    """LP over trajectories feasible on steps 0..k with objective ``sense * sum(weights * p)``.

    ``weights`` has shape (k, m), one coefficient per step and load.
    """
    block = prefix_block(dsys, d, k)
    c = np.zeros(block.size)
    c[: k * block.q] = sense * np.asarray(weights, dtype=float).reshape(-1)
    return LinearProgram(c, F=block.F, g=block.g, lo=block.lo, hi=block.hi), block


def _solve_weighted(dsys, d, k, weights, sense) -> tuple[SolveResult, np.ndarray | None]:
    lp, block = lead_time_lp(dsys, d, k, weights, sense)
    res = solve_lp(lp)
    if not res.ok:
        return res, None
    p = res.z[: k * block.q].reshape(k, block.q)
    return res, p


@dataclass
class TDResult:
    envelope: EnvelopeSeries
    p_up: np.ndarray | None    # argmax trajectory at the last defined lead time
    p_down: np.ndarray | None  # argmin trajectory at the last defined lead time


def _sweep(dsys, d, K, weight_fn, workers):
    """Solve max and min LPs for k = 1..K; stops at the first infeasible lead time."""
    E_up = np.full(K + 1, np.nan)
    E_down = np.full(K + 1, np.nan)
    E_up[0] = E_down[0] = 0.0
    arg_up = arg_dn = None
    infeasible = None

    def solve(k):
        w_up, w_dn = weight_fn(k)
        up = _solve_weighted(dsys, d, k, w_up, +1)
        dn = _solve_weighted(dsys, d, k, w_dn, -1)
        return up, dn

    results = map_ordered(solve, list(range(1, K + 1)), workers)
    for k, ((r_up, p_up), (r_dn, p_dn)) in enumerate(results, start=1):
        if r_up.status is Status.NUMERIC_FAILURE or r_dn.status is Status.NUMERIC_FAILURE:
            raise RuntimeError(f"LP numeric failure at lead time {k}")
        if not (r_up.ok and r_dn.ok):
            infeasible = k
            break
        E_up[k] = r_up.objective
        E_down[k] = -r_dn.objective
        arg_up, arg_dn = p_up, p_dn
    return E_down, E_up, infeasible, arg_up, arg_dn


def compute_td_envelope(dsys: DiscreteSystem, d: Trajectory | None = None, K: int | None = None, workers: int = 1) -> TDResult:
    """Max/min total cumulative energy at each lead time, states constrained on [0, k] only."""
    K = dsys.K if K is None else K
    m = dsys.power_dim

    def weights(k):
        w = np.full((k, m), dsys.dt)
        return w, w

    E_down, E_up, infeasible, p_up, p_dn = _sweep(dsys, d, K, weights, workers)
    env = EnvelopeSeries(
        dsys.dt, E_down, E_up, EnvelopeKind.TD,
        defined_horizon(E_down, E_up), infeasible_step=infeasible,
    )
    return TDResult(env, p_up, p_dn)


def greedy_extreme(dsys: DiscreteSystem, d: Trajectory | None, K: int, upper: bool) -> np.ndarray:
    """Scalar greedy trajectory: max (or min) power that keeps the next state in bounds."""
    if dsys.state_dim != 1 or dsys.power_dim != 1:
        raise ValueError("greedy construction is defined for scalar systems only")
    src = dsys.source
    a, b = dsys.Ad[0, 0], dsys.Bpd[0, 0]
    c = disturbance_forcing(dsys, d, K)[:, 0]
    x = src.x0[0]
    p = np.empty(K)
    for k in range(K):
        drift = a * x + c[k]
        if b > 0:
            target = src.x_max[0] if upper else src.x_min[0]
            need = (target - drift) / b
            pk = min(src.p_max[0], max(src.p_min[0], need))
        else:
            pk = src.p_max[0] if upper else src.p_min[0]
        p[k] = pk
        x = drift + b * pk
    return p


def greedy_td_check(dsys: DiscreteSystem, d: Trajectory | None, envelope: EnvelopeSeries) -> dict:
    """Largest relative deviation between the LP bounds and greedy cumulative energies."""
    if dsys.state_dim != 1:
        raise ValueError("greedy check applies to one-state systems only")
    K = envelope.defined_up_to
    out = {}
    for name, upper, E in (("upper", True, envelope.E_up), ("lower", False, envelope.E_down)):
        p = greedy_extreme(dsys, d, K, upper)
        E_g = np.concatenate([[0.0], np.cumsum(p) * dsys.dt])
        scale = np.maximum(np.abs(E[: K + 1]), dsys.dt * float(np.max(dsys.source.p_max)))
        out[name] = float(np.max(np.abs(E[: K + 1] - E_g) / scale)) if K else 0.0
    return out
