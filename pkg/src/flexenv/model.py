"""Continuous and discretized lossy linear systems, simulation and feasibility checks.

The system class is

    dx/dt = A x + B_p p + B_d d

with a Metzler ``A`` (nonnegative off-diagonal) whose diagonal is nonpositive,
nonnegative ``B_p`` and nonnegative power inputs.  State bounds are enforced
at grid points only.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

DEFAULT_STATE_TOL = 1e-6


class StructureError(ValueError):
    """Raised when matrix dimensions are inconsistent."""


class StabilityError(ValueError):
    """Raised when a forward-Euler step is too long for the system's losses."""


class Scheme(str, enum.Enum):
    FORWARD_EULER = "ForwardEuler"
    EXACT_ZOH = "ExactZOH"


def _as_matrix(value, rows: int | None = None, cols: int | None = None, name: str = "") -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise StructureError(f"{name} must be a matrix, got ndim={arr.ndim}")
    if rows is not None and arr.shape[0] != rows:
        raise StructureError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise StructureError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def _as_vector(value, size: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if arr.size == 1 and size > 1:
        arr = np.full(size, arr[0])
    if arr.size != size:
        raise StructureError(f"{name} has length {arr.size}, expected {size}")
    return arr


@dataclass(frozen=True)
class LinearLossySystem:
    """Continuous-time model with power and state bounds.

    Matrices are stored as float arrays; the constructor only checks
    dimensions.  Use :func:`validate_system` to check the sign structure.
    """

    A: np.ndarray
    B_p: np.ndarray
    B_d: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    x0: np.ndarray
    state_labels: tuple[str, ...] = ()
    power_labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise StructureError(f"A must be square, got {A.shape}")
        B_p = _as_matrix(self.B_p, rows=n, name="B_p")
        m = B_p.shape[1]
        if np.size(self.B_d) == 0:
            B_d = np.zeros((n, 0))
        else:
            B_d = _as_matrix(self.B_d, rows=n, name="B_d")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B_p", B_p)
        object.__setattr__(self, "B_d", B_d)
        for name, size in (("p_min", m), ("p_max", m), ("x_min", n), ("x_max", n), ("x0", n)):
            object.__setattr__(self, name, _as_vector(getattr(self, name), size, name))
        for arr in (A, B_p, B_d):
            arr.setflags(write=False)
        slabels = tuple(self.state_labels) or tuple(f"x{i}" for i in range(n))
        plabels = tuple(self.power_labels) or tuple(f"p{j}" for j in range(m))
        if len(slabels) != n or len(plabels) != m:
            raise StructureError("label lists do not match dimensions")
        object.__setattr__(self, "state_labels", slabels)
        object.__setattr__(self, "power_labels", plabels)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def power_dim(self) -> int:
        return self.B_p.shape[1]

    @property
    def dist_dim(self) -> int:
        return self.B_d.shape[1]

    def replace(self, **changes) -> "LinearLossySystem":
        fields = {
            "A": self.A, "B_p": self.B_p, "B_d": self.B_d,
            "p_min": self.p_min, "p_max": self.p_max,
            "x_min": self.x_min, "x_max": self.x_max, "x0": self.x0,
            "state_labels": self.state_labels, "power_labels": self.power_labels,
        }
        fields.update(changes)
        return LinearLossySystem(**fields)

    def to_dict(self, units: dict | None = None) -> dict:
        return {
            "units": units or {"time": "s", "power": "W", "energy": "J", "state": "degC"},
            "A": self.A.tolist(),
            "B_p": self.B_p.tolist(),
            "B_d": self.B_d.tolist(),
            "p_min": self.p_min.tolist(),
            "p_max": self.p_max.tolist(),
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "x0": self.x0.tolist(),
            "state_labels": list(self.state_labels),
            "power_labels": list(self.power_labels),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearLossySystem":
        required = ("A", "B_p", "p_min", "p_max", "x_min", "x_max", "x0")
        missing = [k for k in required if k not in doc]
        if missing:
            raise StructureError(f"system document is missing fields: {missing}")
        n = len(doc["A"])
        return cls(
            A=doc["A"],
            B_p=doc["B_p"],
            B_d=doc.get("B_d") or np.zeros((n, 0)),
            p_min=doc["p_min"],
            p_max=doc["p_max"],
            x_min=doc["x_min"],
            x_max=doc["x_max"],
            x0=doc["x0"],
            state_labels=tuple(doc.get("state_labels", ())),
            power_labels=tuple(doc.get("power_labels", ())),
        )

    def dump(self, path: str | Path, units: dict | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(units), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "LinearLossySystem":
        return cls.from_dict(json.loads(Path(path).read_text()))


def validate_system(sys: LinearLossySystem, tol: float = 0.0) -> list[str]:
    """Return every violated structural invariant; empty when the model is in class."""
    report = []
    A, B_p = sys.A, sys.B_p
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B_p)) and np.all(np.isfinite(sys.B_d))):
        report.append("non-finite matrix entries")
    n = sys.state_dim
    for i in range(n):
        if A[i, i] > tol:
            report.append(f"diagonal positive at ({i},{i})")
        for j in range(n):
            if i != j and A[i, j] < -tol:
                report.append(f"off-diagonal negative at ({i},{j})")
    for i, j in zip(*np.nonzero(B_p < -tol)):
        report.append(f"B_p negative at ({i},{j})")
    for j in range(sys.power_dim):
        if sys.p_min[j] < -tol:
            report.append(f"p_min negative at {j}")
        if sys.p_min[j] > sys.p_max[j] + tol:
            report.append(f"p_min exceeds p_max at {j}")
    for i in range(n):
        if sys.x_min[i] > sys.x_max[i] + tol:
            report.append(f"x_min exceeds x_max at {i}")
        elif not sys.x_min[i] - tol <= sys.x0[i] <= sys.x_max[i] + tol:
            report.append(f"x0 outside state bounds at {i}")
    return report


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """exp(A t) by scaling and squaring with a Pade core."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructureError(f"matrix exponential needs a square matrix, got {A.shape}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return scipy.linalg.expm(A * t)


def _zoh(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    # exp([[A, B], [0, 0]] dt) = [[Ad, dt * sum_m (A dt)^m / (m+1)! B], [0, I]]; valid for singular A.
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = matrix_exponential(M, dt)
    return E[:n, :n], E[:n, n:]


@dataclass(frozen=True)
class DiscreteSystem:
    """A LinearLossySystem stepped on a uniform grid of ``K`` steps of ``dt`` seconds."""

    source: LinearLossySystem
    dt: float
    K: int
    scheme: Scheme
    Ad: np.ndarray
    Bpd: np.ndarray
    Bdd: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.source.state_dim

    @property
    def power_dim(self) -> int:
        return self.source.power_dim

    @property
    def dist_dim(self) -> int:
        return self.source.dist_dim

    def with_horizon(self, K: int) -> "DiscreteSystem":
        return DiscreteSystem(self.source, self.dt, int(K), self.scheme, self.Ad, self.Bpd, self.Bdd)


def discretize(sys: LinearLossySystem, dt: float, scheme: Scheme | str = Scheme.EXACT_ZOH, K: int = 0) -> DiscreteSystem:
    scheme = Scheme(scheme)
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = sys.state_dim
    if scheme is Scheme.FORWARD_EULER:
        worst = float(np.max(np.abs(np.diag(sys.A)))) if n else 0.0
        if dt * worst >= 1.0:
            raise StabilityError(
                f"forward Euler needs dt < {1.0 / worst:.6g} s (1/max|A_ii|), got dt = {dt:g} s"
            )
        Ad = np.eye(n) + dt * sys.A
        Bpd = dt * sys.B_p
        Bdd = dt * sys.B_d
    else:
        B = np.hstack([sys.B_p, sys.B_d])
        Ad, Bd = _zoh(sys.A, B, dt)
        Bpd, Bdd = Bd[:, : sys.power_dim], Bd[:, sys.power_dim:]
        # exp of a Metzler matrix is nonnegative; clear roundoff
        Ad = np.where(np.abs(Ad) < 1e-300, 0.0, Ad)
    return DiscreteSystem(sys, float(dt), int(K), scheme, Ad, Bpd, Bdd)


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant input: ``values[k]`` is held over step k."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory has non-finite entries")
        object.__setattr__(self, "values", vals)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def cumulative_energy(self) -> np.ndarray:
        """Per-channel energy consumed by the start of each step, shape (K+1, dim)."""
        out = np.zeros((self.K + 1, self.dim))
        out[1:] = np.cumsum(self.values * self.dt, axis=0)
        return out

    @classmethod
    def constant(cls, dt: float, K: int, value) -> "Trajectory":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(dt, np.tile(value, (K, 1)))


@dataclass(frozen=True)
class StateTrajectory:
    dt: float
    values: np.ndarray  # (K+1, state_dim), row 0 is the initial state


@dataclass(frozen=True)
class TrajectoryVerdict:
    feasible: bool
    worst_over: np.ndarray
    worst_under: np.ndarray
    first_violation_step: int | None = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "worst_over": self.worst_over.tolist(),
            "worst_under": self.worst_under.tolist(),
            "first_violation_step": self.first_violation_step,
        }


def simulate(dsys: DiscreteSystem, p: Trajectory, d: Trajectory | None = None, x0=None) -> StateTrajectory:
    """Step ``x[k+1] = Ad x[k] + Bpd p[k] + Bdd d[k]`` over the length of ``p``."""
    K = p.K
    if p.dim != dsys.power_dim:
        raise StructureError(f"power trajectory has {p.dim} channels, system has {dsys.power_dim}")
    if not np.isclose(p.dt, dsys.dt):
        raise StructureError(f"power trajectory dt={p.dt} does not match system dt={dsys.dt}")
    if dsys.dist_dim:
        if d is None:
            raise StructureError("system has disturbance channels but no disturbance was given")
        if d.dim != dsys.dist_dim or d.K < K or not np.isclose(d.dt, dsys.dt):
            raise StructureError("disturbance trajectory does not match the power grid")
        dd = d.values[:K] @ dsys.Bdd.T
    else:
        dd = np.zeros((K, dsys.state_dim))
    forcing = p.values @ dsys.Bpd.T + dd
    x = np.empty((K + 1, dsys.state_dim))
    x[0] = dsys.source.x0 if x0 is None else x0
    Ad = dsys.Ad
    for k in range(K):
        x[k + 1] = Ad @ x[k] + forcing[k]
    return StateTrajectory(dsys.dt, x)


def check_state_feasibility(xs: StateTrajectory, sys: LinearLossySystem, tol: float = DEFAULT_STATE_TOL) -> TrajectoryVerdict:
    X = np.asarray(xs.values)
    if X.ndim != 2 or X.shape[1] != sys.state_dim:
        raise StructureError("state trajectory does not match the system")
    over = np.maximum(X - sys.x_max, 0.0)
    under = np.maximum(sys.x_min - X, 0.0)
    worst_over = over.max(axis=0)
    worst_under = under.max(axis=0)
    bad = np.nonzero(((over > tol) | (under > tol)).any(axis=1))[0]
    first = int(bad[0]) if bad.size else None
    return TrajectoryVerdict(first is None, worst_over, worst_under, first)
