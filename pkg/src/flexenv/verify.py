"""Samplers, adversarial trajectories, exhaustive oracles and evaluation metrics.

Every check here is independent of the optimisation engines: trajectories are
built from the envelope numbers alone and judged by forward simulation.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .envelope import EnvelopeSeries
from .model import DiscreteSystem, Trajectory, simulate

COMFORT_TOL = 0.01       # degC, soundness tolerance on simulated states
CORRIDOR_TOL = 1e-6      # J, slack when testing corridor membership
ORACLE_BUDGET = 10**7


class SamplingDeadEnd(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"corridor sampler reached a dead end at step {step}")
        self.step = step


class Mode(str, enum.Enum):
    EARLIEST_MAX = "EarliestMax"
    LATEST_MAX = "LatestMax"
    EARLIEST_THEN_MIN = "EarliestThenMin"
    LATEST_MIN = "LatestMin"


# --------------------------------------------------------------------------
# corridor helpers


def _per_step(v, K: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.full(K, float(v.reshape(-1)[0])) if v.size == 1 else v.reshape(-1)[:K].copy()


def _bounds(env: EnvelopeSeries, p_lo, p_hi, K: int | None):
    K = env.defined_up_to if K is None else min(K, env.defined_up_to)
    return K, _per_step(p_lo, K), _per_step(p_hi, K)


def tightened_corridor(L: np.ndarray, U: np.ndarray, p_lo: np.ndarray, p_hi: np.ndarray, dt: float):
    """Backward pass: the part of [L, U] from which the rest of the corridor stays reachable.

    Returns ``(L', U')``; an empty step (L' > U') means no power-feasible
    trajectory follows the whole corridor.
    """
    L = np.array(L, dtype=float)
    U = np.array(U, dtype=float)
    for k in range(L.size - 2, -1, -1):
        U[k] = min(U[k], U[k + 1] - p_lo[k] * dt)
        L[k] = max(L[k], L[k + 1] - p_hi[k] * dt)
    return L, U


def _corridor(env: EnvelopeSeries, K: int):
    L = np.minimum(env.E_down[: K + 1], env.E_up[: K + 1])
    U = env.E_up[: K + 1].copy()
    L[0] = U[0] = 0.0
    return L, U


def sample_in_envelope(
    env: EnvelopeSeries,
    p_lo,
    p_hi,
    rng: np.random.Generator | int | None = None,
    K: int | None = None,
    lookahead: bool = True,
    endpoint_prob: float = 0.0,
    max_backtrack: int = 10,
) -> Trajectory:
    """Random power trajectory whose cumulative energy stays inside ``env``.

    At each step power is drawn uniformly from the power bounds intersected
    with the corridor at the next step.  With ``lookahead`` the corridor is
    first tightened backwards so the forward pass cannot dead-end; without it
    the sampler backtracks up to ``max_backtrack`` steps and then raises
    :class:`SamplingDeadEnd`.  ``endpoint_prob`` is the chance of taking one
    of the interval ends instead, which pushes samples onto the boundary.
    """
    rng = np.random.default_rng(rng)
    K, lo, hi = _bounds(env, p_lo, p_hi, K)
    dt = env.dt
    L, U = _corridor(env, K)
    if lookahead:
        L, U = tightened_corridor(L, U, lo, hi, dt)
        if np.any(L > U + CORRIDOR_TOL):
            raise SamplingDeadEnd(int(np.argmax(L > U + CORRIDOR_TOL)))

    def interval(k, E):
        a = max(lo[k], (L[k + 1] - E) / dt)
        b = min(hi[k], (U[k + 1] - E) / dt)
        return a, b

    def draw(a, b):
        if b <= a:
            return 0.5 * (a + b)
        if endpoint_prob and rng.random() < endpoint_prob:
            return a if rng.random() < 0.5 else b
        return rng.uniform(a, b)

    p = np.zeros(K)
    E = np.zeros(K + 1)
    k = 0
    retries = np.zeros(K, dtype=int)
    while k < K:
        a, b = interval(k, E[k])
        if a <= b + CORRIDOR_TOL / dt:
            p[k] = min(max(draw(a, b), lo[k]), hi[k])
            E[k + 1] = E[k] + p[k] * dt
            k += 1
            continue
        # dead end: step back and redraw
        back = k - 1
        while back >= 0 and retries[back] >= max_backtrack:
            back -= 1
        if back < 0 or k - back > max_backtrack:
            raise SamplingDeadEnd(k)
        retries[back] += 1
        k = back
    return Trajectory(dt, p[:, None])


def _greedy(L, U, lo, hi, dt, take_max: bool) -> np.ndarray:
    K = lo.size
    p = np.zeros(K)
    E = 0.0
    for k in range(K):
        a = max(lo[k], (L[k + 1] - E) / dt)
        b = min(hi[k], (U[k + 1] - E) / dt)
        if b < a - CORRIDOR_TOL / dt:
            raise SamplingDeadEnd(k)
        p[k] = max(a, b) if take_max else min(a, b)
        p[k] = min(max(p[k], lo[k]), hi[k])
        E += p[k] * dt
    return p


def extreme_trajectory(env: EnvelopeSeries, p_lo, p_hi, mode: Mode | str, K: int | None = None) -> Trajectory:
    """Corridor-extremal trajectory built greedily on the tightened corridor.

    EarliestMax      -- as much power as early as possible (tracks the upper bound);
    LatestMin        -- as little power as late as possible (tracks the lower bound);
    LatestMax        -- little power first, then as much as possible, ending on E_up(K);
    EarliestThenMin  -- as much power first, then as little as possible, ending on E_down(K).
    """
    mode = Mode(mode)
    K, lo, hi = _bounds(env, p_lo, p_hi, K)
    L, U = _corridor(env, K)
    if mode is Mode.LATEST_MAX:
        L[K] = U[K]
    elif mode is Mode.EARLIEST_THEN_MIN:
        U[K] = L[K]
    L, U = tightened_corridor(L, U, lo, hi, env.dt)
    take_max = mode in (Mode.EARLIEST_MAX, Mode.EARLIEST_THEN_MIN)
    return Trajectory(env.dt, _greedy(L, U, lo, hi, env.dt, take_max)[:, None])


def in_corridor(E: np.ndarray, env: EnvelopeSeries, K: int | None = None, tol: float = CORRIDOR_TOL) -> bool:
    """``E`` holds cumulative energies on steps 0..K (or more)."""
    K = env.defined_up_to if K is None else K
    E = np.asarray(E, dtype=float)[: K + 1]
    return bool(np.all(E >= env.E_down[: K + 1] - tol) and np.all(E <= env.E_up[: K + 1] + tol))


# --------------------------------------------------------------------------
# discomfort and metrics


@dataclass
class DiscomfortReport:
    worst_above: float
    worst_below: float
    trajectories: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"worst_above_C": self.worst_above, "worst_below_C": self.worst_below}


def state_deviation(xs: np.ndarray, dsys: DiscreteSystem) -> tuple[float, float]:
    """Largest excursion above x_max and below x_min over all states and steps."""
    src = dsys.source
    above = float(np.max(np.asarray(xs) - src.x_max, initial=0.0))
    below = float(np.max(src.x_min - np.asarray(xs), initial=0.0))
    return max(above, 0.0), max(below, 0.0)


def worst_discomfort(dsys: DiscreteSystem, d: Trajectory | None, td_env: EnvelopeSeries) -> DiscomfortReport:
    """Comfort deviation of the two extreme corridor trajectories inside a TD envelope.

    Late maximal heating gives the warmest end state; early heating followed
    by minimal heating gives the coldest one.  One-state systems only.
    """
    if dsys.state_dim != 1 or dsys.power_dim != 1:
        raise ValueError("worst-case discomfort is defined for one-state systems only")
    src = dsys.source
    above = below = 0.0
    trajs = {}
    for mode in (Mode.LATEST_MAX, Mode.EARLIEST_THEN_MIN):
        p = extreme_trajectory(td_env, src.p_min[0], src.p_max[0], mode)
        xs = simulate(dsys, p, d).values
        a, b = state_deviation(xs, dsys)
        above, below = max(above, a), max(below, b)
        trajs[mode.value] = p
    return DiscomfortReport(above, below, trajs)


def envelope_area(env: EnvelopeSeries, k: int | None = None) -> float:
    """Sum of widths times dt on steps 0..k; widths are zero past ``defined_up_to``."""
    k = env.K if k is None else k
    return float(env.width()[: k + 1].sum() * env.dt)


def area_reduction(ti: EnvelopeSeries, td: EnvelopeSeries, k: int | None = None) -> float:
    """``1 - area_ti / area_td``; NaN when the TD area is zero."""
    if not math.isclose(ti.dt, td.dt):
        raise ValueError("envelopes must share dt")
    a_td = envelope_area(td, k)
    if a_td <= 0.0:
        return float("nan")
    return 1.0 - envelope_area(ti, k) / a_td


def mfph(ti: EnvelopeSeries, k: int | None = None) -> float:
    """Seconds until the TI bounds first cross (or become undefined), else the full horizon."""
    k = ti.K if k is None else k
    if ti.defined_up_to >= k:
        return k * ti.dt
    return (ti.defined_up_to + 1) * ti.dt


@dataclass
class MetricsRow:
    archetype: str
    horizon_s: float
    area_td: float
    area_ti: float
    reduction: float
    mfph_s: float
    worst_above_C: float
    worst_below_C: float

    HEADER = "archetype,horizon_s,area_td,area_ti,reduction,mfph_s,worst_above_C,worst_below_C"

    def to_csv(self) -> str:
        return (
            f"{self.archetype},{self.horizon_s:.10g},{self.area_td:.10g},{self.area_ti:.10g},"
            f"{self.reduction:.10g},{self.mfph_s:.10g},{self.worst_above_C:.10g},{self.worst_below_C:.10g}"
        )


def metrics_row(name: str, dsys: DiscreteSystem, d, td: EnvelopeSeries, ti: EnvelopeSeries, k: int) -> MetricsRow:
    sub = EnvelopeSeries(td.dt, td.E_down[: k + 1], td.E_up[: k + 1], td.kind, min(td.defined_up_to, k))
    disc = worst_discomfort(dsys, d, sub)
    return MetricsRow(
        name, k * td.dt, envelope_area(td, k), envelope_area(ti, k),
        area_reduction(ti, td, k), mfph(ti, k), disc.worst_above, disc.worst_below,
    )


# --------------------------------------------------------------------------
# randomized soundness


@dataclass
class SoundnessReport:
    kind: str
    samples: int
    violations: int
    worst: float
    dead_ends: int
    horizon: int
    min_margin: float = math.inf   # closest approach to a bound among comfortable samples
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "samples": self.samples, "violations": self.violations,
            "worst_violation_C": self.worst, "dead_ends": self.dead_ends, "horizon": self.horizon,
            "min_margin_C": self.min_margin, "examples": self.examples,
        }


def run_soundness(
    dsys: DiscreteSystem,
    d: Trajectory | None,
    sampler: Callable[[np.random.Generator], np.ndarray],
    horizon: int,
    n: int,
    seed: int,
    kind: str,
    tol: float = COMFORT_TOL,
) -> SoundnessReport:
    """Simulate ``n`` sampled per-load power arrays (horizon x m) and count comfort violations."""
    rng = np.random.default_rng(seed)
    viol = dead = 0
    worst = 0.0
    margin = math.inf
    src = dsys.source
    examples = []
    for i in range(n):
        try:
            P = sampler(rng)
        except SamplingDeadEnd:
            dead += 1
            continue
        xs = simulate(dsys, Trajectory(dsys.dt, P[:horizon]), d).values
        dev = max(state_deviation(xs, dsys))
        worst = max(worst, dev)
        margin = min(margin, float(np.min(np.minimum(src.x_max - xs, xs - src.x_min))))
        if dev > tol:
            viol += 1
            if len(examples) < 5:
                examples.append({"sample": i, "deviation_C": dev})
    return SoundnessReport(kind, n, viol, worst, dead, horizon, margin, examples)


def scalar_sampler(env: EnvelopeSeries, p_lo, p_hi, K: int, endpoint_prob: float = 0.0):
    def draw(rng):
        return sample_in_envelope(env, p_lo, p_hi, rng, K, endpoint_prob=endpoint_prob).values
    return draw


def box_sampler(per_load: list[EnvelopeSeries], dsys: DiscreteSystem, K: int, endpoint_prob: float = 0.0):
    """Each load is sampled independently inside its own box envelope."""
    src = dsys.source

    def draw(rng):
        cols = [
            sample_in_envelope(env, src.p_min[j], src.p_max[j], rng, K, endpoint_prob=endpoint_prob).values[:, 0]
            for j, env in enumerate(per_load)
        ]
        return np.column_stack(cols)
    return draw


def dispatched_sampler(env: EnvelopeSeries, delta: np.ndarray, tot_lo, tot_hi, K: int, endpoint_prob: float = 0.0):
    """Pooled power sampled in ``env`` and split among loads by the dispatch fractions."""
    delta = np.asarray(delta, dtype=float)

    def draw(rng):
        p = sample_in_envelope(env, tot_lo[:K], tot_hi[:K], rng, K, endpoint_prob=endpoint_prob).values[:, 0]
        return delta[:K] * p[:, None]
    return draw


# --------------------------------------------------------------------------
# exhaustive oracle


@dataclass
class OracleTable:
    """Every gridded trajectory on ``k_max`` steps with its states and energies."""

    dt: float
    powers: np.ndarray      # (N, k_max, m) per-load power
    energy: np.ndarray      # (N, k_max+1, m) per-load cumulative energy
    states: np.ndarray      # (N, k_max+1, n)
    prefix_ok: np.ndarray   # (N, k_max+1) states within bounds on steps 0..k
    increment: np.ndarray   # grid spacing per enumerated channel (W)
    deviation: np.ndarray   # (N, k_max+1) worst comfort excursion on steps 0..k

    @property
    def k_max(self) -> int:
        return self.powers.shape[1]

    @property
    def total_energy(self) -> np.ndarray:
        return self.energy.sum(axis=2)

    def feasible_range(self, k: int) -> tuple[float, float]:
        """Min / max total energy at step k over trajectories feasible on steps 0..k."""
        ok = self.prefix_ok[:, k]
        if not ok.any():
            return math.nan, math.nan
        E = self.total_energy[ok, k]
        return float(E.min()), float(E.max())

    def td_check(self, env: EnvelopeSeries, tol: float = 1e-6) -> dict:
        """Do the LP bounds enclose the oracle's feasible range, and by how much?"""
        slack = float(np.sum(self.increment)) * self.dt
        out = {"encloses": True, "within_increment": True, "max_gap_J": 0.0, "increment_J": slack}
        for k in range(1, min(self.k_max, env.defined_up_to) + 1):
            lo, hi = self.feasible_range(k)
            if math.isnan(lo):
                continue
            scale = tol * max(1.0, abs(env.E_up[k]))
            if env.E_up[k] < hi - scale or env.E_down[k] > lo + scale:
                out["encloses"] = False
            gap = max(env.E_up[k] - hi, lo - env.E_down[k])
            out["max_gap_J"] = max(out["max_gap_J"], float(gap))
            if gap > slack + scale:
                out["within_increment"] = False
        return out

    def corridor_check(self, members: np.ndarray, horizon: int, tol: float = COMFORT_TOL) -> dict:
        """Comfort verdict over the trajectories flagged by ``members`` up to ``horizon``."""
        dev = self.deviation[members, horizon] if members.any() else np.zeros(0)
        return {
            "inside": int(members.sum()),
            "violations": int(np.sum(dev > tol)),
            "worst_C": float(dev.max(initial=0.0)),
        }

    def ti_check(self, env: EnvelopeSeries, load: int | None = None, tol: float = COMFORT_TOL) -> dict:
        """Trajectories whose (per-load or total) energy stays in ``env`` must be comfortable."""
        h = min(self.k_max, env.defined_up_to)
        E = self.total_energy if load is None else self.energy[:, :, load]
        members = np.all(
            (E[:, : h + 1] >= env.E_down[: h + 1] - CORRIDOR_TOL) & (E[:, : h + 1] <= env.E_up[: h + 1] + CORRIDOR_TOL),
            axis=1,
        )
        return self.corridor_check(members, h, tol) | {"horizon": h}

    def box_check(self, per_load: list[EnvelopeSeries], tol: float = COMFORT_TOL) -> dict:
        """Every load inside its own envelope at once."""
        h = min(self.k_max, *(e.defined_up_to for e in per_load))
        members = np.ones(self.powers.shape[0], dtype=bool)
        for j, env in enumerate(per_load):
            E = self.energy[:, : h + 1, j]
            members &= np.all((E >= env.E_down[: h + 1] - CORRIDOR_TOL) & (E <= env.E_up[: h + 1] + CORRIDOR_TOL), axis=1)
        return self.corridor_check(members, h, tol) | {"horizon": h}


def brute_force_oracle(
    dsys: DiscreteSystem,
    d: Trajectory | None,
    power_levels: int,
    k_max: int,
    dispatch: np.ndarray | None = None,
    total_bounds: tuple | None = None,
) -> OracleTable:
    """Enumerate every trajectory on a uniform power grid and simulate it.

    Without ``dispatch`` each load takes ``power_levels`` values on
    [p_min, p_max] independently.  With ``dispatch`` (k_max x m fractions) a
    single pooled power on ``total_bounds`` is gridded and split among loads.
    """
    src = dsys.source
    m = dsys.power_dim
    if dispatch is None:
        grids = [np.linspace(src.p_min[j], src.p_max[j], power_levels) for j in range(m)]
        channels = m
    else:
        lo, hi = total_bounds
        grids = [np.linspace(lo, hi, power_levels)]
        channels = 1
    count = power_levels ** (channels * k_max)
    if count > ORACLE_BUDGET:
        raise ValueError(f"oracle needs {count} trajectories, budget is {ORACLE_BUDGET}")
    # per step, all combinations of the channel grids
    step_choices = np.array(list(itertools.product(*grids)))            # (levels^channels, channels)
    idx = np.array(list(itertools.product(range(len(step_choices)), repeat=k_max)), dtype=int)
    U = step_choices[idx]                                                # (N, k_max, channels)
    if dispatch is None:
        P = U
    else:
        P = np.asarray(dispatch, dtype=float)[None, :k_max, :] * U      # (N, k_max, m)
    N = P.shape[0]
    n = dsys.state_dim
    forcing = np.zeros((k_max, n))
    if dsys.dist_dim:
        forcing = d.values[:k_max] @ dsys.Bdd.T
    X = np.empty((N, k_max + 1, n))
    X[:, 0] = src.x0
    for k in range(k_max):
        X[:, k + 1] = X[:, k] @ dsys.Ad.T + P[:, k] @ dsys.Bpd.T + forcing[k]
    E = np.concatenate([np.zeros((N, 1, m)), np.cumsum(P, axis=1) * dsys.dt], axis=1)
    dev_step = np.maximum(np.max(X - src.x_max, axis=2), np.max(src.x_min - X, axis=2))
    dev_step = np.maximum(dev_step, 0.0)
    deviation = np.maximum.accumulate(dev_step, axis=1)
    prefix_ok = deviation <= 1e-9
    inc = np.array([(g[-1] - g[0]) / max(power_levels - 1, 1) for g in grids])
    return OracleTable(dsys.dt, P, E, X, prefix_ok, inc, deviation)


CONSTRUCTION_ORDER = ("Light", "Medium", "Heavy")          # increasing capacity
INSULATION_ORDER = ("VeryWell", "Well", "Medium", "Poor")  # increasing conductance


def archetype_orderings(rows: list[MetricsRow], tol: float = 1e-6) -> dict:
    """Monotonicity of the metrics across the construction x insulation grid.

    ``rows`` holds one row per archetype named ``<Construction>-<Insulation>``,
    all at the same horizon.  MFPH is compared with a tolerance of one second.
    """
    table = {tuple(r.archetype.split("-", 1)): r for r in rows}
    red_vs_cond = red_vs_cap = mfph_vs_cond = True
    for c in CONSTRUCTION_ORDER:
        seq = [table[c, i] for i in INSULATION_ORDER if (c, i) in table]
        for lo, hi in zip(seq, seq[1:]):
            if hi.reduction < lo.reduction - tol:
                red_vs_cond = False
            if hi.mfph_s > lo.mfph_s + 1.0:
                mfph_vs_cond = False
    for i in INSULATION_ORDER:
        seq = [table[c, i] for c in CONSTRUCTION_ORDER if (c, i) in table]
        for lo, hi in zip(seq, seq[1:]):
            if hi.reduction > lo.reduction + tol:
                red_vs_cap = False
    return {
        "reduction_nondecreasing_in_conductance": red_vs_cond,
        "reduction_nonincreasing_in_capacity": red_vs_cap,
        "mfph_nonincreasing_in_conductance": mfph_vs_cond,
    }
