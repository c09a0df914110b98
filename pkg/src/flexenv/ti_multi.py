"""Trajectory-independent envelopes for coupled multi-state systems.

Two settings are covered:

* distributed: every load gets its own cumulative-energy corridor.  The
  corridors form the largest-log-volume box inside the polytope of energies
  that keep every state in bounds whatever the other loads do.
* centralized: one corridor for the pooled energy, with the pool's power split
  among loads by a fixed dispatch plan.

All kernels are the exact discrete responses ``Ad**q @ Bpd / dt``, so the
guarantees hold at grid points without discretization slack.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .envelope import (
    EnvelopeKind,
    EnvelopeSeries,
    defined_horizon,
    free_response,
    map_ordered,
    prefix_block,
    response_kernel,
)
from .model import DiscreteSystem, Trajectory
from .solvers import (
    ConcaveLogProgram,
    LinearProgram,
    SolveResult,
    Status,
    max_min_gap,
    solve_log_box,
    solve_lp,
)

log = logging.getLogger(__name__)

GAP_TOL = 1e-4


@dataclass
class WeightTensors:
    """Per-lead-time extreme kernel entries.

    ``alpha[k]`` / ``beta[k]`` are the entrywise max / min of ``Phi[q] / dt``
    over q < k (the ages of power applied before step k); ``Phi[q]`` is the
    response of the state at step l+1+q to power at step l, so
    ``b(k) = sum_{l<k} Phi[k-1-l] p_l`` is the state increment caused by ``p``.
    """

    dt: float
    Phi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def b(self, p: np.ndarray, k: int) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(-1, self.Phi.shape[2])
        if k == 0:
            return np.zeros(self.Phi.shape[1])
        return np.einsum("lij,lj->i", self.Phi[k - 1::-1][:k], p[:k])


def compute_weight_tensors(dsys: DiscreteSystem, k_max: int | None = None) -> WeightTensors:
    k_max = dsys.K if k_max is None else k_max
    Phi = response_kernel(dsys, max(k_max, 1))
    scaled = Phi / dsys.dt
    alpha = np.empty((k_max + 1,) + Phi.shape[1:])
    beta = np.empty_like(alpha)
    alpha[0] = beta[0] = scaled[0]
    if k_max:
        alpha[1:] = np.maximum.accumulate(scaled[:k_max], axis=0)
        beta[1:] = np.minimum.accumulate(scaled[:k_max], axis=0)
    return WeightTensors(dsys.dt, Phi, alpha, beta)


# ---------------------------------------------------------------- distributed


@dataclass
class BoxEnvelope:
    per_load: list[EnvelopeSeries]
    p_plus: np.ndarray | None
    p_minus: np.ndarray | None
    horizon: int
    stats: dict = field(default_factory=dict)

    def total(self) -> EnvelopeSeries:
        E_down = np.sum([e.E_down for e in self.per_load], axis=0)
        E_up = np.sum([e.E_up for e in self.per_load], axis=0)
        first = self.per_load[0]
        return EnvelopeSeries(first.dt, E_down, E_up, EnvelopeKind.TI_DISTRIBUTED, self.horizon, label="sum")


def _box_program(dsys: DiscreteSystem, d: Trajectory | None, K: int, wt: WeightTensors, free: np.ndarray):
    """Decision vector: [u+, x+, u-, x-, E+, E-] with u = p / P and E = energy / (P dt)."""
    src = dsys.source
    n, m = dsys.state_dim, dsys.power_dim
    P = float(np.max(src.p_max)) or 1.0
    maps = np.broadcast_to(dsys.Bpd * P, (K, n, m))
    blk = prefix_block(dsys, d, K, maps, np.tile(src.p_min / P, (K, 1)), np.tile(src.p_max / P, (K, 1)))
    nb = blk.size
    nE = K * m
    off_plus, off_minus, off_Ep, off_Em = 0, nb, 2 * nb, 2 * nb + nE
    N = 2 * nb + 2 * nE
    F = sp.block_diag([blk.F, blk.F, sp.csr_matrix((0, 2 * nE))]).tocsr()
    g = np.concatenate([blk.g, blk.g])
    steps = np.arange(1, K + 1)
    E_lo = np.outer(steps, src.p_min / P).reshape(-1)
    E_hi = np.outer(steps, src.p_max / P).reshape(-1)
    lo = np.concatenate([blk.lo, blk.lo, E_lo, E_lo])
    hi = np.concatenate([blk.hi, blk.hi, E_hi, E_hi])

    rows, cols, vals, h = [], [], [], []
    r = 0
    for k in range(1, K + 1):
        a = wt.alpha[k] * P * dsys.dt
        b = wt.beta[k] * P * dsys.dt
        for i in range(n):
            # alpha(k) E+(k) - b+(k) <= 0 with b+(k) = x+(k) - free(k)
            for j in np.nonzero(a[i])[0]:
                rows.append(r); cols.append(off_Ep + (k - 1) * m + j); vals.append(a[i, j])
            rows.append(r); cols.append(off_plus + blk.x_index(k, i)); vals.append(-1.0)
            h.append(-free[k, i])
            r += 1
            # b-(k) - beta(k) E-(k) <= 0
            for j in np.nonzero(b[i])[0]:
                rows.append(r); cols.append(off_Em + (k - 1) * m + j); vals.append(-b[i, j])
            rows.append(r); cols.append(off_minus + blk.x_index(k, i)); vals.append(1.0)
            h.append(free[k, i])
            r += 1
    G = sp.csr_matrix((vals, (rows, cols)), shape=(r, N))
    lp = LinearProgram(np.zeros(N), G, np.array(h), F, g, lo, hi)
    gap_A = sp.hstack([sp.csr_matrix((nE, 2 * nb)), sp.identity(nE), -sp.identity(nE)]).tocsr()
    layout = {"blk": blk, "offsets": (off_plus, off_minus, off_Ep, off_Em), "P": P, "nE": nE}
    return ConcaveLogProgram(lp, gap_A, np.zeros(nE)), layout


def _box_feasible(dsys, d, k, wt, free) -> bool:
    clp, _ = _box_program(dsys, d, k, wt, free)
    res = max_min_gap(clp)
    return res.ok and res.objective > GAP_TOL


def compute_distributed_box(dsys: DiscreteSystem, d: Trajectory | None = None, K: int | None = None) -> BoxEnvelope:
    """Jointly optimized per-load corridors over the whole horizon.

    The horizon is first shortened to the longest prefix on which every gap
    can be strictly positive; that prefix is the flexibility provision horizon
    of the box.
    """
    K = dsys.K if K is None else K
    wt = compute_weight_tensors(dsys, K)
    free = free_response(dsys, d, K)
    horizon = K
    if not _box_feasible(dsys, d, K, wt, free):
        lo, hi = 0, K  # lo feasible (trivially), hi infeasible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _box_feasible(dsys, d, mid, wt, free):
                lo = mid
            else:
                hi = mid
        horizon = lo
    m = dsys.power_dim
    E_plus = np.full((K + 1, m), np.nan)
    E_minus = np.full((K + 1, m), np.nan)
    E_plus[0] = E_minus[0] = 0.0
    p_plus = p_minus = None
    stats = {"horizon": horizon}
    res = None
    while horizon > 0:
        clp, lay = _box_program(dsys, d, horizon, wt, free)
        res = solve_log_box(clp)
        if res.ok:
            break
        # the interior is very thin right at the provision horizon; back off one step
        log.info("log-box solve at horizon %d returned %s; retrying shorter", horizon, res.status.value)
        stats.setdefault("backoff", []).append(horizon)
        horizon -= 1
    stats["horizon"] = horizon
    if res is not None and res.ok:
        stats.update(status=res.status.value, **{k: v for k, v in res.stats.items() if np.isscalar(v)})
        z = res.z
        blk, (op, om, oEp, oEm), P, nE = lay["blk"], lay["offsets"], lay["P"], lay["nE"]
        scale = P * dsys.dt
        E_plus[1: horizon + 1] = z[oEp: oEp + nE].reshape(horizon, m) * scale
        E_minus[1: horizon + 1] = z[oEm: oEm + nE].reshape(horizon, m) * scale
        nu = horizon * m
        p_plus = z[op: op + nu].reshape(horizon, m) * P
        p_minus = z[om: om + nu].reshape(horizon, m) * P
    per_load = []
    for j in range(m):
        per_load.append(EnvelopeSeries(
            dsys.dt, E_minus[:, j], E_plus[:, j], EnvelopeKind.TI_DISTRIBUTED,
            min(horizon, defined_horizon(E_minus[:, j], E_plus[:, j])),
            label=dsys.source.power_labels[j],
            infeasible_step=horizon + 1 if horizon < K else None,
        ))
    return BoxEnvelope(per_load, p_plus, p_minus, horizon, stats)


def box_residual(box: BoxEnvelope, dsys: DiscreteSystem, wt: WeightTensors | None = None) -> float:
    """Worst violation of the polytope inequalities by the box corners, relative to b.

    With nonnegative weights the binding corners are E+ for the upper rows and
    E- for the lower rows.
    """
    if box.horizon == 0:
        return 0.0
    wt = compute_weight_tensors(dsys, box.horizon) if wt is None else wt
    Ep = np.column_stack([e.E_up for e in box.per_load])
    Em = np.column_stack([e.E_down for e in box.per_load])
    worst = 0.0
    for k in range(1, box.horizon + 1):
        b_plus = wt.b(box.p_plus, k)
        b_minus = wt.b(box.p_minus, k)
        up = wt.alpha[k] @ Ep[k] - b_plus
        dn = b_minus - wt.beta[k] @ Em[k]
        scale = max(np.max(np.abs(b_plus)), np.max(np.abs(b_minus)), 1e-12)
        worst = max(worst, float(np.max(up)) / scale, float(np.max(dn)) / scale)
    return worst


# ---------------------------------------------------------------- centralized


@dataclass(frozen=True)
class DispatchPlan:
    """Fractions of the pooled power sent to each load, one row per step."""

    delta: np.ndarray

    def __post_init__(self):
        delta = np.atleast_2d(np.asarray(self.delta, dtype=float))
        if np.any(delta < 0):
            raise ValueError("dispatch fractions must be nonnegative")
        if not np.allclose(delta.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("dispatch fractions must sum to one at every step")
        object.__setattr__(self, "delta", delta)

    @property
    def K(self) -> int:
        return self.delta.shape[0]

    @classmethod
    def uniform(cls, K: int, N: int) -> "DispatchPlan":
        return cls(np.full((K, N), 1.0 / N))

    @classmethod
    def indicator(cls, K: int, N: int, j: int) -> "DispatchPlan":
        delta = np.zeros((K, N))
        delta[:, j] = 1.0
        return cls(delta)

    @classmethod
    def load(cls, path: str | Path) -> "DispatchPlan":
        doc = json.loads(Path(path).read_text())
        return cls(np.asarray(doc["delta"] if isinstance(doc, dict) else doc, dtype=float))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"delta": self.delta.tolist()}))

    def total_power_bounds(self, p_min: np.ndarray, p_max: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tightest pooled-power interval per step that keeps every share within its bounds."""
        lo = np.zeros(self.K)
        hi = np.full(self.K, np.inf)
        for l, row in enumerate(self.delta):
            on = row > 0
            lo[l] = np.max(p_min[on] / row[on], initial=0.0)
            hi[l] = np.min(p_max[on] / row[on], initial=np.inf)
            off = ~on
            if np.any(p_min[off] > 0) or np.any(p_max[off] < 0):
                hi[l] = -np.inf
        return lo, hi


def compute_gamma(dsys: DiscreteSystem, delta: DispatchPlan, k: int, Phi: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Max / min over l < k of ``(Phi[k-1-l] @ delta_l) / dt``, one entry per state."""
    n = dsys.state_dim
    if k == 0:
        return np.zeros(n), np.zeros(n)
    Phi = response_kernel(dsys, k) if Phi is None else Phi
    ages = np.arange(k - 1, -1, -1)  # age of step l = k-1-l
    vals = np.einsum("lij,lj->li", Phi[ages], delta.delta[:k]) / dsys.dt
    return vals.max(axis=0), vals.min(axis=0)


@dataclass
class CentralizedResult:
    envelope: EnvelopeSeries
    p_tot_plus: np.ndarray | None
    p_tot_minus: np.ndarray | None
    p_tot_lo: np.ndarray
    p_tot_hi: np.ndarray
    delta: DispatchPlan


def _centralized_lp(dsys, d, delta: DispatchPlan, k, Phi, free, lo_tot, hi_tot, upper: bool):
    n = dsys.state_dim
    P = float(np.max(hi_tot[:k][np.isfinite(hi_tot[:k])], initial=1.0)) or 1.0
    maps = np.einsum("ij,lj->li", dsys.Bpd, delta.delta[:k])[:, :, None] * P
    blk = prefix_block(dsys, d, k, maps, lo_tot[:k, None] / P, hi_tot[:k, None] / P)
    gp, gm = compute_gamma(dsys, delta, k, Phi)
    N = blk.size + 1
    scale = P * dsys.dt
    G = sp.lil_matrix((n, N))
    h = np.empty(n)
    for i in range(n):
        if upper:
            # gamma+_i E - (x_i(k) - free_i(k)) <= 0
            G[i, N - 1] = gp[i] * scale
            G[i, blk.x_index(k, i)] = -1.0
            h[i] = -free[k, i]
        else:
            G[i, N - 1] = -gm[i] * scale
            G[i, blk.x_index(k, i)] = 1.0
            h[i] = free[k, i]
    c = np.zeros(N)
    c[-1] = 1.0 if upper else -1.0
    F = sp.hstack([blk.F, sp.csr_matrix((blk.F.shape[0], 1))])
    lo = np.append(blk.lo, -np.inf)
    hi = np.append(blk.hi, np.inf)
    lp = LinearProgram(c, G.tocsr(), h, F, blk.g, lo, hi)
    res = solve_lp(lp)
    if res.status is Status.NUMERIC_FAILURE:
        raise RuntimeError(f"centralized LP numeric failure at lead time {k}")
    if not res.ok:
        return res, None, None
    return res, res.z[-1] * scale, res.z[:k] * P


def compute_centralized_envelope(
    dsys: DiscreteSystem,
    d: Trajectory | None = None,
    delta: DispatchPlan | None = None,
    K: int | None = None,
    workers: int = 1,
) -> CentralizedResult:
    """Pooled-energy corridor under a fixed dispatch plan, one LP pair per lead time."""
    K = dsys.K if K is None else K
    src = dsys.source
    delta = DispatchPlan.uniform(K, dsys.power_dim) if delta is None else delta
    if delta.K < K or delta.delta.shape[1] != dsys.power_dim:
        raise ValueError("dispatch plan does not cover the horizon and loads")
    lo_tot, hi_tot = delta.total_power_bounds(src.p_min, src.p_max)
    Phi = response_kernel(dsys, max(K, 1))
    free = free_response(dsys, d, K)
    E_up = np.full(K + 1, np.nan)
    E_down = np.full(K + 1, np.nan)
    E_up[0] = E_down[0] = 0.0
    p_plus = p_minus = None
    infeasible = None
    if np.any(lo_tot[:K] > hi_tot[:K]):
        infeasible = int(np.argmax(lo_tot[:K] > hi_tot[:K])) + 1
    K_solve = K if infeasible is None else infeasible - 1

    def solve(k):
        up = _centralized_lp(dsys, d, delta, k, Phi, free, lo_tot, hi_tot, True)
        dn = _centralized_lp(dsys, d, delta, k, Phi, free, lo_tot, hi_tot, False)
        return up, dn

    for k, (up, dn) in enumerate(map_ordered(solve, list(range(1, K_solve + 1)), workers), start=1):
        if up[1] is None or dn[1] is None:
            infeasible = k
            break
        E_up[k], E_down[k] = up[1], dn[1]
        p_plus, p_minus = up[2], dn[2]
    env = EnvelopeSeries(
        dsys.dt, E_down, E_up, EnvelopeKind.TI_CENTRALIZED,
        defined_horizon(E_down, E_up), label="pool", infeasible_step=infeasible,
    )
    return CentralizedResult(env, p_plus, p_minus, lo_tot[:K], hi_tot[:K], delta)
