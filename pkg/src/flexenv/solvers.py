"""Solver contracts for linear programs and log-gap maximization.

Both problem shapes are stated as *maximization* over a decision vector ``z``
with inequality rows ``G z <= h``, equality rows ``F z = g`` and simple
bounds ``lo <= z <= hi``.  Statuses are returned as data: infeasibility of a
per-lead-time problem is a meaningful result, not an error.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp

FEAS_TOL = 1e-7


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERIC_FAILURE = "NumericFailure"


def _rows(M, n: int):
    if M is None:
        return sp.csr_matrix((0, n))
    return sp.csr_matrix(M)


def _vec(v, size: int, fill: float) -> np.ndarray:
    if v is None:
        return np.full(size, fill)
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 1 and size != 1:
        v = np.full(size, v[0])
    return v


@dataclass
class LinearProgram:
    """maximize c.z subject to G z <= h, F z = g, lo <= z <= hi."""

    c: np.ndarray
    G: sp.csr_matrix | np.ndarray | None = None
    h: np.ndarray | None = None
    F: sp.csr_matrix | np.ndarray | None = None
    g: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.G = _rows(self.G, n)
        self.F = _rows(self.F, n)
        self.h = _vec(self.h, self.G.shape[0], 0.0)
        self.g = _vec(self.g, self.F.shape[0], 0.0)
        self.lo = _vec(self.lo, n, -np.inf)
        self.hi = _vec(self.hi, n, np.inf)
        if self.G.shape[1] != n or self.F.shape[1] != n:
            raise ValueError("constraint matrices do not match the objective length")
        if self.h.size != self.G.shape[0] or self.g.size != self.F.shape[0]:
            raise ValueError("right-hand sides do not match constraint rows")
        for name in ("c", "h", "g"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        if not (np.all(np.isfinite(self.G.data)) and np.all(np.isfinite(self.F.data))):
            raise ValueError("constraint matrices have non-finite entries")

    @property
    def n(self) -> int:
        return self.c.size

    def residual(self, z: np.ndarray) -> float:
        """Largest constraint violation at ``z``, each row scaled by its largest coefficient."""
        res = [0.0]
        if self.G.shape[0]:
            scale = _row_scale(self.G, self.h)
            res.append(float(np.max((self.G @ z - self.h) / scale)))
        if self.F.shape[0]:
            scale = _row_scale(self.F, self.g)
            res.append(float(np.max(np.abs(self.F @ z - self.g) / scale)))
        res.append(float(np.max(self.lo - z, initial=0.0)))
        res.append(float(np.max(z - self.hi, initial=0.0)))
        return max(res)


@dataclass
class ConcaveLogProgram:
    """maximize sum_s ln(a_s.z + b_s) over the feasible set of ``constraints``."""

    constraints: LinearProgram
    gap_A: sp.csr_matrix | np.ndarray
    gap_b: np.ndarray

    def __post_init__(self):
        self.gap_A = sp.csr_matrix(self.gap_A)
        self.gap_b = np.asarray(self.gap_b, dtype=float).ravel()
        if self.gap_A.shape != (self.gap_b.size, self.constraints.n):
            raise ValueError("gap terms do not match the decision vector")


@dataclass
class SolveResult:
    status: Status
    z: np.ndarray | None = None
    objective: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _row_scale(M: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    scale = np.asarray(abs(M).max(axis=1).todense()).ravel()
    scale = np.maximum(scale, np.abs(rhs) * 1e-12)
    scale[scale == 0] = 1.0
    return scale


def _equilibrate(lp: LinearProgram):
    sG = _row_scale(lp.G, lp.h)
    sF = _row_scale(lp.F, lp.g)
    G = sp.diags(1.0 / sG) @ lp.G
    F = sp.diags(1.0 / sF) @ lp.F
    return G.tocsr(), lp.h / sG, F.tocsr(), lp.g / sF, sG, sF


def solve_lp(lp: LinearProgram) -> SolveResult:
    """Solve with HiGHS after row equilibration; returns dual information in ``stats``."""
    t0 = time.perf_counter()
    G, h, F, g, sG, sF = _equilibrate(lp)
    bounds = np.column_stack([lp.lo, lp.hi])
    bounds = [(None if np.isinf(a) else a, None if np.isinf(b) else b) for a, b in bounds]
    try:
        res = scipy.optimize.linprog(
            -lp.c,
            A_ub=G if G.shape[0] else None,
            b_ub=h if G.shape[0] else None,
            A_eq=F if F.shape[0] else None,
            b_eq=g if F.shape[0] else None,
            bounds=bounds,
            method="highs",
        )
    except ValueError as exc:
        return SolveResult(Status.NUMERIC_FAILURE, stats={"message": str(exc)})
    stats = {"message": res.message, "seconds": time.perf_counter() - t0, "iterations": res.nit}
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED, stats=stats)
    if res.status != 0:
        return SolveResult(Status.NUMERIC_FAILURE, stats=stats)
    z = res.x
    # duals of the maximization problem in original row units
    if G.shape[0]:
        stats["dual_ineq"] = -res.ineqlin.marginals / sG
    if F.shape[0]:
        stats["dual_eq"] = -res.eqlin.marginals / sF
    stats["dual_lower"] = -res.lower.marginals
    stats["dual_upper"] = -res.upper.marginals
    stats["residual"] = lp.residual(z)
    return SolveResult(Status.OPTIMAL, z, float(lp.c @ z), stats)


def duality_gap(lp: LinearProgram, result: SolveResult) -> float:
    """Relative gap between primal objective and the dual objective built from ``stats``."""
    y = result.stats.get("dual_ineq", np.zeros(0))
    w = result.stats.get("dual_eq", np.zeros(0))
    zl = result.stats["dual_lower"]
    zu = result.stats["dual_upper"]
    dual = float(lp.h @ y) if y.size else 0.0
    if w.size:
        dual += float(lp.g @ w)
    fin_lo = np.isfinite(lp.lo)
    fin_hi = np.isfinite(lp.hi)
    dual += float(lp.lo[fin_lo] @ zl[fin_lo])
    dual += float(lp.hi[fin_hi] @ zu[fin_hi])
    return abs(dual - result.objective) / max(1.0, abs(result.objective))


def max_min_gap(clp: ConcaveLogProgram) -> SolveResult:
    """LP: maximize s subject to every gap term >= s.  ``z`` is returned without ``s``."""
    lp = clp.constraints
    n, S = lp.n, clp.gap_b.size
    col = sp.csr_matrix(np.ones((S, 1)))
    G = sp.vstack([
        sp.hstack([lp.G, sp.csr_matrix((lp.G.shape[0], 1))]),
        sp.hstack([-clp.gap_A, col]),
    ])
    h = np.concatenate([lp.h, clp.gap_b])
    F = sp.hstack([lp.F, sp.csr_matrix((lp.F.shape[0], 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    # cap s so the LP stays bounded when gaps are unconstrained
    cap = 1e3 * max(1.0, float(np.max(np.abs(lp.hi[np.isfinite(lp.hi)]), initial=1.0)))
    aux = LinearProgram(c, G, h, F, lp.g, np.append(lp.lo, -np.inf), np.append(lp.hi, cap))
    res = solve_lp(aux)
    if res.ok:
        res = SolveResult(res.status, res.z[:n], res.objective, res.stats)
    return res


def solve_log_box(clp: ConcaveLogProgram, solver: str = "CLARABEL") -> SolveResult:
    """Maximize the sum of log gaps with an interior-point conic solver.

    A phase-one LP checks that every gap can be made strictly positive; if not
    the result is Infeasible and ``stats['violating_gap']`` names the term that
    stays nonpositive.
    """
    import cvxpy as cp

    t0 = time.perf_counter()
    phase1 = max_min_gap(clp)
    if not phase1.ok:
        return SolveResult(phase1.status, stats={"phase1": phase1.stats.get("message")})
    gaps = clp.gap_A @ phase1.z + clp.gap_b
    if phase1.objective <= 0:
        return SolveResult(
            Status.INFEASIBLE,
            stats={"violating_gap": int(np.argmin(gaps)), "max_min_gap": phase1.objective},
        )
    lp = clp.constraints
    G, h, F, g, _, _ = _equilibrate(lp)
    z = cp.Variable(lp.n)
    cons = []
    if G.shape[0]:
        cons.append(G @ z <= h)
    if F.shape[0]:
        cons.append(F @ z == g)
    fin = np.isfinite(lp.lo)
    if fin.any():
        cons.append(z[np.nonzero(fin)[0]] >= lp.lo[fin])
    fin = np.isfinite(lp.hi)
    if fin.any():
        cons.append(z[np.nonzero(fin)[0]] <= lp.hi[fin])
    objective = cp.Maximize(cp.sum(cp.log(clp.gap_A @ z + clp.gap_b)))
    prob = cp.Problem(objective, cons)
    try:
        with warnings.catch_warnings():
            # inaccurate solutions are flagged through the status below
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=solver)
    except cp.error.SolverError as exc:
        return SolveResult(Status.NUMERIC_FAILURE, stats={"message": str(exc)})
    stats = {"solver_status": prob.status, "seconds": time.perf_counter() - t0,
             "inaccurate": prob.status == cp.OPTIMAL_INACCURATE}
    if prob.status == cp.INFEASIBLE:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    if prob.status == cp.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, stats=stats)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or z.value is None:
        return SolveResult(Status.NUMERIC_FAILURE, stats=stats)
    zv = np.asarray(z.value, dtype=float)
    gaps = clp.gap_A @ zv + clp.gap_b
    if np.min(gaps) <= 0:
        return SolveResult(Status.NUMERIC_FAILURE, stats={**stats, "violating_gap": int(np.argmin(gaps))})
    stats["residual"] = lp.residual(zv)
    stats["min_gap"] = float(np.min(gaps))
    return SolveResult(Status.OPTIMAL, zv, float(np.sum(np.log(gaps))), stats)
