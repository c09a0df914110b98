"""Envelope series, CSV round-trip and the prefix-problem assembly shared by the engines."""

from __future__ import annotations

import enum
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .model import DiscreteSystem, Trajectory

ORDER_TOL = 1e-6


class EnvelopeKind(str, enum.Enum):
    TD = "TD"
    TI_SCALAR = "TI_scalar"
    TI_DISTRIBUTED = "TI_distributed_per_load"
    TI_CENTRALIZED = "TI_centralized"


@dataclass
class EnvelopeSeries:
    """Cumulative-energy bounds on steps 0..K (joules).

    Entries after ``defined_up_to`` carry no guarantee; they are NaN where the
    underlying problem was infeasible and may be crossed (E_up < E_down)
    past the maximum flexibility provision horizon.
    """

    dt: float
    E_down: np.ndarray
    E_up: np.ndarray
    kind: EnvelopeKind
    defined_up_to: int
    label: str = ""
    infeasible_step: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.E_down = np.asarray(self.E_down, dtype=float)
        self.E_up = np.asarray(self.E_up, dtype=float)
        self.kind = EnvelopeKind(self.kind)

    @property
    def K(self) -> int:
        return self.E_up.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    def width(self) -> np.ndarray:
        """E_up - E_down where defined, clipped at zero, and zero beyond the defined horizon."""
        w = np.zeros(self.K + 1)
        k = self.defined_up_to + 1
        w[:k] = np.maximum(self.E_up[:k] - self.E_down[:k], 0.0)
        return w

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# kind={self.kind.value} dt={self.dt:g} defined_up_to={self.defined_up_to}")
        if self.label:
            buf.write(f" label={self.label}")
        buf.write("\nstep,time_s,E_down_J,E_up_J\n")
        for k in range(self.K + 1):
            buf.write(f"{k},{k * self.dt:.10g},{self.E_down[k]:.10g},{self.E_up[k]:.10g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "EnvelopeSeries":
        lines = Path(path).read_text().splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[2:] if line.strip()])
        return cls(
            dt=float(meta["dt"]),
            E_down=rows[:, 2],
            E_up=rows[:, 3],
            kind=EnvelopeKind(meta["kind"]),
            defined_up_to=int(meta["defined_up_to"]),
            label=meta.get("label", ""),
        )


def defined_horizon(E_down: np.ndarray, E_up: np.ndarray, tol: float = ORDER_TOL) -> int:
    """Last step k such that every step up to k is finite and ordered."""
    ok = np.isfinite(E_down) & np.isfinite(E_up) & (E_down <= E_up + tol)
    bad = np.nonzero(~ok)[0]
    return int(bad[0]) - 1 if bad.size else E_up.size - 1


def disturbance_forcing(dsys: DiscreteSystem, d: Trajectory | None, K: int) -> np.ndarray:
    """Bdd d_k for k < K, shape (K, n)."""
    if dsys.dist_dim == 0:
        return np.zeros((K, dsys.state_dim))
    if d is None or d.K < K or d.dim != dsys.dist_dim:
        raise ValueError(f"disturbance must cover {K} steps with {dsys.dist_dim} channels")
    return d.values[:K] @ dsys.Bdd.T


def free_response(dsys: DiscreteSystem, d: Trajectory | None, K: int) -> np.ndarray:
    """State trajectory with zero power, shape (K+1, n)."""
    c = disturbance_forcing(dsys, d, K)
    x = np.empty((K + 1, dsys.state_dim))
    x[0] = dsys.source.x0
    for k in range(K):
        x[k + 1] = dsys.Ad @ x[k] + c[k]
    return x


def response_kernel(dsys: DiscreteSystem, K: int) -> np.ndarray:
    """Phi[q] = Ad^q Bpd for q < K: the effect of power at step l on the state at step l+1+q."""
    n, m = dsys.state_dim, dsys.power_dim
    Phi = np.empty((max(K, 1), n, m))
    Phi[0] = dsys.Bpd
    for q in range(1, K):
        Phi[q] = dsys.Ad @ Phi[q - 1]
    return np.maximum(Phi[:K], 0.0)


@dataclass
class PrefixBlock:
    """Variables ``u`` (k x q inputs) and ``x`` (k x n states, steps 1..k) of one trajectory.

    ``input_maps[l]`` is the n x q matrix through which input ``u_l`` enters the
    state update; the state-space recursion is imposed as equality rows so the
    assembled problems stay sparse.
    """

    k: int
    n: int
    q: int
    F: sp.csr_matrix
    g: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def size(self) -> int:
        return self.k * (self.q + self.n)

    def u_index(self, l: int, j: int = 0) -> int:
        return l * self.q + j

    def x_index(self, step: int, i: int = 0) -> int:
        """Column of state i at grid step ``step`` (1..k)."""
        return self.k * self.q + (step - 1) * self.n + i


def prefix_block(
    dsys: DiscreteSystem,
    d: Trajectory | None,
    k: int,
    input_maps: np.ndarray | None = None,
    u_lo: np.ndarray | None = None,
    u_hi: np.ndarray | None = None,
) -> PrefixBlock:
    """Dynamics, power bounds and state bounds on steps 0..k for one trajectory."""
    src = dsys.source
    n = dsys.state_dim
    if input_maps is None:
        input_maps = np.broadcast_to(dsys.Bpd, (k, n, dsys.power_dim))
        u_lo = np.broadcast_to(src.p_min, (k, dsys.power_dim)) if u_lo is None else u_lo
        u_hi = np.broadcast_to(src.p_max, (k, dsys.power_dim)) if u_hi is None else u_hi
    q = input_maps.shape[2]
    c = disturbance_forcing(dsys, d, k)
    nu = k * q
    rows, cols, vals = [], [], []
    g = np.empty(k * n)
    for r in range(k):
        base = r * n
        # x_{r+1} - Ad x_r - B_r u_r = c_r
        for i in range(n):
            rows.append(base + i)
            cols.append(nu + r * n + i)
            vals.append(1.0)
        Br = input_maps[r]
        ii, jj = np.nonzero(Br)
        rows.extend(base + ii)
        cols.extend(r * q + jj)
        vals.extend(-Br[ii, jj])
        if r == 0:
            g[base:base + n] = dsys.Ad @ src.x0 + c[0]
        else:
            ii, jj = np.nonzero(dsys.Ad)
            rows.extend(base + ii)
            cols.extend(nu + (r - 1) * n + jj)
            vals.extend(-dsys.Ad[ii, jj])
            g[base:base + n] = c[r]
    F = sp.csr_matrix((vals, (rows, cols)), shape=(k * n, k * (q + n)))
    lo = np.concatenate([np.asarray(u_lo, dtype=float).reshape(-1), np.tile(src.x_min, k)])
    hi = np.concatenate([np.asarray(u_hi, dtype=float).reshape(-1), np.tile(src.x_max, k)])
    return PrefixBlock(k, n, q, F, g, lo, hi)


def map_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to ``items`` on up to ``workers`` threads; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
