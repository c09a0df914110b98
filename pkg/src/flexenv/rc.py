"""Resistance-capacitance thermal networks compiled into lossy linear systems.

Room temperature dynamics:

    C_i dT_i/dt = -(T_i - T_a)/R_i - sum_j (T_i - T_j)/R_ij + p_i + g_i

The ambient temperature is disturbance channel 0; per-room heat gains g_i are
channels 1..n.  Temperatures are in degC, capacities in J/K, resistances in K/W.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .model import LinearLossySystem, Trajectory

T_MIN, T_MAX, T0 = 22.0, 24.0, 23.0


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Room:
    label: str
    C: float
    R_amb: float | None = None  # None: adiabatic towards ambient
    heated: bool = True
    p_max_room: float = 1000.0
    p_min_room: float = 0.0


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    R: float


@dataclass(frozen=True)
class RcNetwork:
    rooms: tuple[Room, ...]
    edges: tuple[Edge, ...] = ()
    T_min: float = T_MIN
    T_max: float = T_MAX
    T0: float = T0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def n(self) -> int:
        return len(self.rooms)

    def validate(self) -> None:
        if not self.rooms:
            raise NetworkError("network has no rooms")
        for r in self.rooms:
            if not r.C > 0:
                raise NetworkError(f"room {r.label}: capacity must be positive")
            if r.R_amb is not None and not r.R_amb > 0:
                raise NetworkError(f"room {r.label}: ambient resistance must be positive")
            if r.heated and not (0 <= r.p_min_room <= r.p_max_room):
                raise NetworkError(f"room {r.label}: power bounds must satisfy 0 <= p_min <= p_max")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < self.n and 0 <= e.j < self.n):
                raise NetworkError(f"edge ({e.i},{e.j}) references a missing room")
            if e.i == e.j:
                raise NetworkError(f"edge ({e.i},{e.j}) is a self-loop")
            key = frozenset((e.i, e.j))
            if key in seen:
                raise NetworkError(f"duplicate edge between rooms {e.i} and {e.j}")
            seen.add(key)
            if not e.R > 0:
                raise NetworkError(f"edge ({e.i},{e.j}): resistance must be positive")
        if not self.T_min <= self.T0 <= self.T_max:
            raise NetworkError("initial temperature outside the comfort band")
        if not any(r.heated for r in self.rooms):
            raise NetworkError("network has no heated room")

    def conductance_matrix(self) -> np.ndarray:
        """Symmetric inter-room conductances 1/R_ij (W/K)."""
        H = np.zeros((self.n, self.n))
        for e in self.edges:
            H[e.i, e.j] = H[e.j, e.i] = 1.0 / e.R
        return H

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rooms": [asdict(r) for r in self.rooms],
            "edges": [asdict(e) for e in self.edges],
            "comfort": {"T_min": self.T_min, "T_max": self.T_max},
            "T0": self.T0,
            "units": {"C": "J/K", "R": "K/W", "power": "W", "temperature": "degC"},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RcNetwork":
        try:
            rooms = tuple(Room(**r) for r in doc["rooms"])
            edges = tuple(Edge(**e) for e in doc.get("edges", ()))
        except (KeyError, TypeError) as exc:
            raise NetworkError(f"malformed network document: {exc}") from exc
        comfort = doc.get("comfort", {})
        return cls(
            rooms, edges,
            T_min=comfort.get("T_min", T_MIN), T_max=comfort.get("T_max", T_MAX),
            T0=doc.get("T0", T0), name=doc.get("name", ""),
        )

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "RcNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class AmbientSeries:
    dt: float
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size == 0:
            raise ValueError("ambient series is empty")
        if not np.all(np.isfinite(vals)):
            raise ValueError("ambient series has non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def K(self) -> int:
        return self.values.size


def constant_ambient(value: float, dt: float, K: int) -> AmbientSeries:
    return AmbientSeries(dt, np.full(K, float(value)), f"constant:{value:g}")


def synth_ambient(mean: float, amplitude: float, period: float, dt: float, K: int) -> AmbientSeries:
    """mean + amplitude * sin(2 pi t / period), sampled at the start of each step."""
    for v in (mean, amplitude, period, dt):
        if not math.isfinite(v):
            raise ValueError("synthetic ambient parameters must be finite")
    t = np.arange(K) * dt
    return AmbientSeries(dt, mean + amplitude * np.sin(2 * np.pi * t / period),
                         f"synthetic:mean={mean:g},amplitude={amplitude:g},period={period:g}")


def ambient_from_csv(path: str | Path, rtol: float = 1e-9) -> AmbientSeries:
    """Read ``timestamp_s,temp_C`` rows on a uniform, strictly increasing grid."""
    t, v = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                ts = float(row[0])
            except ValueError:
                continue  # header
            if len(row) < 2 or not row[1].strip():
                raise ValueError(f"missing temperature at t={row[0]}")
            t.append(ts)
            v.append(float(row[1]))
    if not t:
        raise ValueError(f"{path}: no ambient samples")
    t = np.asarray(t)
    if t.size == 1:
        raise ValueError(f"{path}: need at least two samples to infer the time step")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError(f"{path}: timestamps must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=rtol, atol=0):
        raise ValueError(f"{path}: timestamps are not on a uniform grid")
    return AmbientSeries(float(steps[0]), np.asarray(v), str(path))


def compile_network(rc: RcNetwork, ambient: AmbientSeries, K: int | None = None,
                    gains: np.ndarray | None = None) -> tuple[LinearLossySystem, Trajectory]:
    """Build the state-space model and the disturbance trajectory [T_a, g_1..g_n]."""
    rc.validate()
    K = ambient.K if K is None else K
    if ambient.K < K:
        raise NetworkError(f"ambient series has {ambient.K} steps, horizon needs {K}")
    n = rc.n
    C = np.array([r.C for r in rc.rooms])
    G_amb = np.array([0.0 if r.R_amb is None else 1.0 / r.R_amb for r in rc.rooms])
    H = rc.conductance_matrix()
    A = (H - np.diag(G_amb + H.sum(axis=1))) / C[:, None]
    heated = [i for i, r in enumerate(rc.rooms) if r.heated]
    B_p = np.zeros((n, len(heated)))
    for col, i in enumerate(heated):
        B_p[i, col] = 1.0 / C[i]
    B_d = np.column_stack([G_amb / C, np.diag(1.0 / C)])
    sys = LinearLossySystem(
        A=A, B_p=B_p, B_d=B_d,
        p_min=[rc.rooms[i].p_min_room for i in heated],
        p_max=[rc.rooms[i].p_max_room for i in heated],
        x_min=np.full(n, rc.T_min), x_max=np.full(n, rc.T_max), x0=np.full(n, rc.T0),
        state_labels=tuple(r.label for r in rc.rooms),
        power_labels=tuple(rc.rooms[i].label for i in heated),
    )
    g = np.zeros((K, n)) if gains is None else np.asarray(gains, dtype=float).reshape(K, n)
    d = Trajectory(ambient.dt, np.column_stack([ambient.values[:K], g]))
    return sys, d


def one_zone(C: float, UA: float, p_max: float, name: str = "zone") -> RcNetwork:
    """Single room with capacity ``C`` (J/K) and ambient conductance ``UA`` (W/K)."""
    return RcNetwork((Room(name, C, 1.0 / UA, True, p_max),), name=name)


def swiss_house() -> RcNetwork:
    return one_zone(20e6, 50.0, 1000.0, "SwissHouse")


class Construction(str, enum.Enum):
    LIGHT = "Light"
    MEDIUM = "Medium"
    HEAVY = "Heavy"


class Insulation(str, enum.Enum):
    VERY_WELL = "VeryWell"
    WELL = "Well"
    MEDIUM = "Medium"
    POOR = "Poor"


CAPACITY_PER_M2 = {Construction.LIGHT: 0.1e6, Construction.MEDIUM: 0.3e6, Construction.HEAVY: 0.5e6}
CONDUCTANCE_PER_M2 = {Insulation.VERY_WELL: 0.34, Insulation.WELL: 0.86, Insulation.MEDIUM: 1.14, Insulation.POOR: 1.71}

DEFAULT_AREA = 100.0
DEFAULT_POWER_DENSITY = 50.0


@dataclass(frozen=True)
class ArchetypeSpec:
    construction: Construction
    insulation: Insulation
    floor_area: float = DEFAULT_AREA
    power_density: float = DEFAULT_POWER_DENSITY

    def __post_init__(self):
        if not (self.floor_area > 0 and self.power_density > 0):
            raise ValueError("floor area and power density must be positive")

    @property
    def name(self) -> str:
        return f"{self.construction.value}-{self.insulation.value}"

    def network(self) -> RcNetwork:
        return one_zone(
            CAPACITY_PER_M2[self.construction] * self.floor_area,
            CONDUCTANCE_PER_M2[self.insulation] * self.floor_area,
            self.power_density * self.floor_area,
            self.name,
        )


def archetype_catalog(area: float = DEFAULT_AREA, power_density: float = DEFAULT_POWER_DENSITY) -> dict[str, RcNetwork]:
    """All construction x insulation combinations as one-zone networks."""
    out = {}
    for c in Construction:
        for ins in Insulation:
            spec = ArchetypeSpec(c, ins, area, power_density)
            out[spec.name] = spec.network()
    return out


@dataclass(frozen=True)
class NineRoomParams:
    """Defaults for a 3-floor x 3-room building of 20 m2 rooms.

    Conductances are per surface in W/K.  Side rooms have three facade walls,
    middle rooms two; the top floor adds a roof and the ground floor a slab.
    The capacity is that of a heavy construction (0.5 MJ/m2K); the interior
    surfaces are uninsulated, so they dominate the exterior ones.
    """

    C_room: float = 1e7
    facade_wall: float = 5.0
    roof: float = 4.0
    ground: float = 3.0
    partition_wall: float = 30.0
    floor_ceiling: float = 40.0
    indoor_insulation_factor: float = 10.0
    p_max_room: float = 1000.0


def nine_room_builder(with_indoor_insulation: bool = False, params: NineRoomParams | dict | None = None) -> RcNetwork:
    if params is None:
        params = NineRoomParams()
    elif isinstance(params, dict):
        params = replace(NineRoomParams(), **params)
    scale = params.indoor_insulation_factor if with_indoor_insulation else 1.0
    rooms, index = [], {}
    for floor in range(3):
        for col in range(3):
            ua = params.facade_wall * (3 if col != 1 else 2)
            if floor == 2:
                ua += params.roof
            if floor == 0:
                ua += params.ground
            index[floor, col] = len(rooms)
            rooms.append(Room(f"F{floor}R{col}", params.C_room, 1.0 / ua, True, params.p_max_room))
    edges = []
    for floor in range(3):
        for col in range(3):
            i = index[floor, col]
            if col < 2:
                edges.append(Edge(i, index[floor, col + 1], scale / params.partition_wall))
            if floor < 2:
                edges.append(Edge(i, index[floor + 1, col], scale / params.floor_ceiling))
    name = "NineRoom-insulated" if with_indoor_insulation else "NineRoom"
    return RcNetwork(tuple(rooms), tuple(edges), name=name)


def adiabatic_room(rc: RcNetwork, i: int) -> RcNetwork:
    """Room ``i`` alone, with no exchange towards its neighbours."""
    r = rc.rooms[i]
    return RcNetwork((r,), (), rc.T_min, rc.T_max, rc.T0, name=f"{r.label}-adiabatic")


def load_model(path: str | Path):
    """Read either a system JSON or an RcNetwork JSON; returns the parsed object."""
    doc = json.loads(Path(path).read_text())
    if "rooms" in doc:
        return RcNetwork.from_dict(doc)
    return LinearLossySystem.from_dict(doc)
