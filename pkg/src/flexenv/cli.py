"""Command-line front end: validate, envelope, verify, sweep.

Exit codes: 0 success, 2 malformed configuration or model document,
3 model invariant violated, 4 solver numeric failure, 5 a TI soundness
violation was found by ``verify``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .envelope import EnvelopeKind, EnvelopeSeries, map_ordered
from .model import (
    LinearLossySystem,
    Scheme,
    StabilityError,
    StructureError,
    Trajectory,
    discretize,
    simulate,
    validate_system,
)
from .rc import (
    DEFAULT_AREA,
    DEFAULT_POWER_DENSITY,
    NetworkError,
    RcNetwork,
    ambient_from_csv,
    archetype_catalog,
    compile_network,
    constant_ambient,
    nine_room_builder,
    swiss_house,
    synth_ambient,
)
from .td import compute_td_envelope
from .ti_multi import DispatchPlan, compute_centralized_envelope, compute_distributed_box
from .ti_scalar import compute_ti_scalar_envelope
from .verify import (
    Mode,
    MetricsRow,
    archetype_orderings,
    area_reduction,
    box_sampler,
    brute_force_oracle,
    dispatched_sampler,
    envelope_area,
    extreme_trajectory,
    metrics_row,
    mfph,
    run_soundness,
    scalar_sampler,
    state_deviation,
)

log = logging.getLogger("flexenv")

EXIT_OK, EXIT_SCHEMA, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_UNSOUND = 0, 2, 3, 4, 5
EXPECTED_UNITS = {"time": "s", "power": "W", "energy": "J", "temperature": "degC"}
DEFAULT_HORIZONS = (3600.0, 14400.0, 43200.0, 86400.0)
ORACLE_MAX_TRAJECTORIES = 10**5


class ConfigError(ValueError):
    """Malformed configuration or model document (exit 2)."""


class InvariantError(ValueError):
    """The model parses but violates a structural invariant (exit 3)."""

    def __init__(self, report: list[str]):
        super().__init__("; ".join(report))
        self.report = report


@dataclass
class RunConfig:
    """One run, read from a JSON document.  Units: seconds, watts, joules, degC."""

    model: str = "builtin:swiss_house"
    model_params: dict = field(default_factory=dict)
    ambient: dict = field(default_factory=lambda: {"type": "constant", "value": 10.0})
    disturbance: list | None = None
    dt: float = 900.0
    horizon: float = 86400.0
    scheme: str = Scheme.EXACT_ZOH.value
    kinds: list | None = None
    dispatch: str | None = None
    seed: int = 0
    samples: int = 1000
    endpoint_prob: float = 0.25
    out: str = "out"
    workers: int = 1
    horizons: list = field(default_factory=lambda: list(DEFAULT_HORIZONS))
    archetype: dict = field(default_factory=lambda: {"area": DEFAULT_AREA, "power_density": DEFAULT_POWER_DENSITY})
    units: dict = field(default_factory=lambda: dict(EXPECTED_UNITS))
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def K(self) -> int:
        return int(round(self.horizon / self.dt))

    @classmethod
    def from_dict(cls, doc, base_dir: Path = Path(".")) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        cfg = cls(**doc, base_dir=base_dir)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, path.parent)

    def check(self) -> None:
        def number(name, positive=True):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number")
            if positive and v <= 0:
                raise ConfigError(f"{name} must be positive")

        number("dt")
        number("horizon")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"horizon {self.horizon:g} s is not a multiple of dt {self.dt:g} s")
        for h in self.horizons:
            r = float(h) / self.dt
            if h <= 0 or abs(r - round(r)) > 1e-9 * max(1.0, r):
                raise ConfigError(f"sweep horizon {h} s is not a positive multiple of dt")
        try:
            Scheme(self.scheme)
        except ValueError as exc:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from exc
        if self.kinds is not None:
            for k in self.kinds:
                try:
                    EnvelopeKind(k)
                except ValueError as exc:
                    raise ConfigError(f"unknown envelope kind {k!r}") from exc
        for name in ("seed", "samples", "workers"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{name} must be a nonnegative integer")
        if not 0.0 <= float(self.endpoint_prob) <= 1.0:
            raise ConfigError("endpoint_prob must lie in [0, 1]")
        if not isinstance(self.model, str):
            raise ConfigError("model must be a path or a builtin name")
        if not isinstance(self.ambient, dict) or "type" not in self.ambient:
            raise ConfigError("ambient must be an object with a 'type'")
        for key, unit in (self.units or {}).items():
            if key in EXPECTED_UNITS and unit != EXPECTED_UNITS[key]:
                raise ConfigError(f"unit for {key} must be {EXPECTED_UNITS[key]!r}, got {unit!r}")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


@dataclass
class Problem:
    name: str
    sys: LinearLossySystem
    d: Trajectory | None
    network: RcNetwork | None = None


# --------------------------------------------------------------------------
# model ingestion


def _ambient(cfg: RunConfig, K: int):
    spec = dict(cfg.ambient)
    kind = spec.pop("type")
    try:
        if kind == "constant":
            return constant_ambient(float(spec.get("value", 10.0)), cfg.dt, K)
        if kind == "synthetic":
            return synth_ambient(float(spec.get("mean", 5.0)), float(spec.get("amplitude", 10.0)),
                                 float(spec.get("period", 86400.0)), cfg.dt, K)
        if kind == "file":
            amb = ambient_from_csv(cfg.resolve(spec["path"]))
        else:
            raise ConfigError(f"unknown ambient type {kind!r}")
    except (KeyError, TypeError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad ambient specification: {exc}") from exc
    if not math.isclose(amb.dt, cfg.dt):
        raise ConfigError(f"ambient file step {amb.dt:g} s differs from dt {cfg.dt:g} s")
    if amb.K < K:
        raise ConfigError(f"ambient file covers {amb.K} steps, horizon needs {K}")
    return amb


def _from_network(name: str, rc: RcNetwork, cfg: RunConfig, K: int) -> Problem:
    try:
        rc.validate()
    except NetworkError as exc:
        raise InvariantError([str(exc)]) from exc
    sysm, d = compile_network(rc, _ambient(cfg, K), K)
    return Problem(name, sysm, d, rc)


def _builtin(name: str, cfg: RunConfig, K: int) -> Problem:
    if name == "swiss_house":
        return _from_network("SwissHouse", swiss_house(), cfg, K)
    if name in ("nine_room", "nine_room_insulated"):
        try:
            rc = nine_room_builder(name.endswith("insulated"), cfg.model_params or None)
        except TypeError as exc:
            raise ConfigError(f"bad nine-room parameters: {exc}") from exc
        return _from_network(rc.name, rc, cfg, K)
    if name.startswith("archetype:"):
        catalog = archetype_catalog(float(cfg.archetype.get("area", DEFAULT_AREA)),
                                    float(cfg.archetype.get("power_density", DEFAULT_POWER_DENSITY)))
        key = name.split(":", 1)[1]
        if key not in catalog:
            raise ConfigError(f"unknown archetype {key!r}; known: {sorted(catalog)}")
        return _from_network(key, catalog[key], cfg, K)
    raise ConfigError(f"unknown builtin model {name!r}")


def load_problem(cfg: RunConfig, K: int | None = None) -> Problem:
    """Parse and validate the configured model; raises ConfigError or InvariantError."""
    K = cfg.K if K is None else K
    if cfg.model.startswith("builtin:"):
        return _builtin(cfg.model.split(":", 1)[1], cfg, K)
    path = cfg.resolve(cfg.model)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read model: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("model document must be a JSON object")
    if "rooms" in doc:
        try:
            rc = RcNetwork.from_dict(doc)
        except (NetworkError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return _from_network(rc.name or path.stem, rc, cfg, K)
    try:
        sysm = LinearLossySystem.from_dict(doc)
    except (StructureError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed system document: {exc}") from exc
    report = validate_system(sysm)
    if report:
        raise InvariantError(report)
    d = None
    if sysm.dist_dim:
        if cfg.disturbance is None:
            raise ConfigError("system has disturbance channels; give 'disturbance' in the configuration")
        vals = np.asarray(cfg.disturbance, dtype=float)
        if vals.ndim == 1:
            vals = np.tile(vals, (K, 1))
        if vals.shape != (K, sysm.dist_dim):
            raise ConfigError(f"disturbance must have {sysm.dist_dim} channels over {K} steps")
        d = Trajectory(cfg.dt, vals)
    return Problem(path.stem, sysm, d)


def _discretize(problem: Problem, cfg: RunConfig, K: int):
    try:
        return discretize(problem.sys, cfg.dt, cfg.scheme, K)
    except StabilityError as exc:
        raise InvariantError([str(exc)]) from exc


def _kinds(cfg: RunConfig, problem: Problem) -> list[EnvelopeKind]:
    scalar = problem.sys.state_dim == 1 and problem.sys.power_dim == 1
    if cfg.kinds is None:
        if scalar:
            return [EnvelopeKind.TD, EnvelopeKind.TI_SCALAR]
        return [EnvelopeKind.TD, EnvelopeKind.TI_DISTRIBUTED, EnvelopeKind.TI_CENTRALIZED]
    kinds = [EnvelopeKind(k) for k in cfg.kinds]
    if EnvelopeKind.TI_SCALAR in kinds and not scalar:
        raise ConfigError("TI_scalar needs a one-state, one-input model")
    return kinds


# --------------------------------------------------------------------------
# envelope computation


@dataclass
class Computed:
    envelopes: dict          # name -> EnvelopeSeries
    results: dict            # kind -> engine result object
    timings: dict


def compute_all(problem: Problem, dsys, kinds, cfg: RunConfig) -> Computed:
    envs, results, timings = {}, {}, {}
    K = dsys.K
    for kind in kinds:
        t0 = time.perf_counter()
        if kind is EnvelopeKind.TD:
            res = compute_td_envelope(dsys, problem.d, K, cfg.workers)
            envs["TD"] = res.envelope
        elif kind is EnvelopeKind.TI_SCALAR:
            res = compute_ti_scalar_envelope(dsys, problem.d, K, cfg.workers)
            envs["TI_scalar"] = res.envelope
        elif kind is EnvelopeKind.TI_DISTRIBUTED:
            res = compute_distributed_box(dsys, problem.d, K)
            for env in res.per_load:
                envs[f"TI_distributed_per_load_{env.label}"] = env
        else:
            delta = DispatchPlan.load(cfg.resolve(cfg.dispatch)) if cfg.dispatch else None
            res = compute_centralized_envelope(dsys, problem.d, delta, K, cfg.workers)
            envs["TI_centralized"] = res.envelope
        results[kind] = res
        timings[kind.value] = time.perf_counter() - t0
    return Computed(envs, results, timings)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def _summary(problem: Problem, dsys, comp: Computed, files: dict) -> dict:
    td = comp.envelopes.get("TD")
    entries = []
    for name, env in comp.envelopes.items():
        entry = {
            "name": name, "kind": env.kind.value, "label": env.label, "file": files.get(name),
            "defined_up_to": env.defined_up_to, "infeasible_step": env.infeasible_step,
            "area_J_s": envelope_area(env), "mfph_s": mfph(env),
            "E_up_end_J": env.E_up[-1], "E_down_end_J": env.E_down[-1],
        }
        if td is not None and name != "TD" and env.kind is not EnvelopeKind.TI_DISTRIBUTED:
            entry["reduction_vs_TD"] = area_reduction(env, td)
        entries.append(entry)
    box = comp.results.get(EnvelopeKind.TI_DISTRIBUTED)
    doc = {
        "model": problem.name, "dt": dsys.dt, "K": dsys.K, "scheme": dsys.scheme.value,
        "state_dim": dsys.state_dim, "power_dim": dsys.power_dim, "envelopes": entries,
    }
    if box is not None:
        total = box.total()
        doc["distributed_total"] = {
            "horizon": box.horizon, "area_J_s": envelope_area(total), "mfph_s": mfph(total),
            "reduction_vs_TD": area_reduction(total, td) if td is not None else None,
        }
    return doc


# --------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig, args) -> int:
    problem = load_problem(cfg)
    dsys = _discretize(problem, cfg, cfg.K)
    _kinds(cfg, problem)
    report = {
        "model": problem.name, "valid": True, "state_dim": dsys.state_dim,
        "power_dim": dsys.power_dim, "dist_dim": dsys.dist_dim, "K": dsys.K, "report": [],
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_envelope(cfg: RunConfig, args) -> int:
    problem = load_problem(cfg)
    dsys = _discretize(problem, cfg, cfg.K)
    kinds = _kinds(cfg, problem)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    comp = compute_all(problem, dsys, kinds, cfg)
    files = {}
    for name, env in comp.envelopes.items():
        fname = f"envelope_{name}.csv"
        env.to_csv(out / fname)
        files[name] = fname
    _dump(out / "summary.json", _summary(problem, dsys, comp, files))
    _dump(out / "timings.json", {"solve_time_s": comp.timings})
    if args.plot:
        from .plotting import plot_envelopes
        main_envs = {n: e for n, e in comp.envelopes.items() if e.kind is not EnvelopeKind.TI_DISTRIBUTED}
        box = comp.results.get(EnvelopeKind.TI_DISTRIBUTED)
        if box is not None:
            main_envs["TI_distributed_total"] = box.total()
        plot_envelopes(main_envs, out / "envelopes.png", problem.name)
    log.info("wrote %d envelope files to %s", len(files), out)
    return EXIT_OK


def _oracle_checks(problem: Problem, dsys, comp: Computed) -> list[dict]:
    """Exhaustive checks on the first few steps when the enumeration is small."""
    checks = []
    m = dsys.power_dim
    levels, k = (5, 4) if m == 1 else (3, 3)
    for kind, res in comp.results.items():
        kk = min(k, dsys.K)
        if kind is EnvelopeKind.TI_CENTRALIZED:
            lo, hi = float(np.max(res.p_tot_lo[:kk])), float(np.min(res.p_tot_hi[:kk]))
            if 9 ** kk > ORACLE_MAX_TRAJECTORIES or lo > hi:
                continue
            table = brute_force_oracle(dsys, problem.d, 9, kk, dispatch=res.delta.delta, total_bounds=(lo, hi))
            checks.append({"kind": kind.value, "oracle": "dispatched", **table.ti_check(res.envelope)})
            continue
        if levels ** (m * kk) > ORACLE_MAX_TRAJECTORIES:
            continue
        table = brute_force_oracle(dsys, problem.d, levels, kk)
        if kind is EnvelopeKind.TD:
            checks.append({"kind": kind.value, "oracle": "td_bounds", **table.td_check(res.envelope)})
        elif kind is EnvelopeKind.TI_DISTRIBUTED:
            checks.append({"kind": kind.value, "oracle": "box", **table.box_check(res.per_load)})
        else:
            checks.append({"kind": kind.value, "oracle": "corridor", **table.ti_check(res.envelope)})
    return checks


def run_verification(problem: Problem, dsys, comp: Computed, cfg: RunConfig) -> dict:
    """All soundness checks for the computed envelopes; deterministic given the seed."""
    src = dsys.source
    verdict = {"model": problem.name, "seed": cfg.seed, "samples": cfg.samples, "kinds": {}}
    ti_violations = 0
    scalar = dsys.state_dim == 1 and dsys.power_dim == 1
    for i, (kind, res) in enumerate(comp.results.items()):
        seed = cfg.seed + 1000 * i
        entry = {}
        if kind is EnvelopeKind.TI_DISTRIBUTED:
            h = res.horizon
            if h > 0:
                rep = run_soundness(dsys, problem.d, box_sampler(res.per_load, dsys, h, cfg.endpoint_prob),
                                    h, cfg.samples, seed, kind.value)
                entry["sampling"] = rep.to_dict()
                ti_violations += rep.violations
        elif kind is EnvelopeKind.TI_CENTRALIZED:
            env = res.envelope
            h = env.defined_up_to
            if h > 0:
                rep = run_soundness(dsys, problem.d,
                                    dispatched_sampler(env, res.delta.delta, res.p_tot_lo, res.p_tot_hi, h, cfg.endpoint_prob),
                                    h, cfg.samples, seed, kind.value)
                entry["sampling"] = rep.to_dict()
                ti_violations += rep.violations
        elif scalar:
            env = res.envelope
            h = env.defined_up_to
            extremes = {}
            for mode in Mode:
                if h == 0:
                    break
                p = extreme_trajectory(env, src.p_min[0], src.p_max[0], mode)
                above, below = state_deviation(simulate(dsys, p, problem.d).values, dsys)
                extremes[mode.value] = {"worst_above": above, "worst_below": below,
                                        "violation": max(above, below) > 0.01}
            entry["extremes"] = extremes
            if kind is EnvelopeKind.TD:
                entry["scenario_A"] = extremes.get(Mode.LATEST_MIN.value)
                entry["scenario_B"] = extremes.get(Mode.EARLIEST_THEN_MIN.value)
            if h > 0:
                rep = run_soundness(dsys, problem.d, scalar_sampler(env, src.p_min[0], src.p_max[0], h, cfg.endpoint_prob),
                                    h, cfg.samples, seed, kind.value)
                entry["sampling"] = rep.to_dict()
            if kind is EnvelopeKind.TI_SCALAR:
                ti_violations += sum(v["violation"] for v in extremes.values())
                ti_violations += entry["sampling"]["violations"] if "sampling" in entry else 0
            else:
                entry["violations_found"] = sum(v["violation"] for v in extremes.values()) + (
                    entry["sampling"]["violations"] if "sampling" in entry else 0)
        verdict["kinds"][kind.value] = entry
    oracle = _oracle_checks(problem, dsys, comp)
    for chk in oracle:
        if chk["kind"] != EnvelopeKind.TD.value:
            ti_violations += chk["violations"]
    verdict["oracle"] = oracle
    verdict["ti_violations"] = ti_violations
    return verdict


def cmd_verify(cfg: RunConfig, args) -> int:
    problem = load_problem(cfg)
    dsys = _discretize(problem, cfg, cfg.K)
    kinds = _kinds(cfg, problem)
    comp = compute_all(problem, dsys, kinds, cfg)
    verdict = run_verification(problem, dsys, comp, cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "verdict.json", verdict)
    if args.plot and dsys.state_dim == 1 and EnvelopeKind.TD in comp.results:
        from .plotting import plot_states
        td = comp.results[EnvelopeKind.TD].envelope
        src = dsys.source
        states = {}
        for label, mode in (("scenario A", Mode.LATEST_MIN), ("scenario B", Mode.EARLIEST_THEN_MIN)):
            p = extreme_trajectory(td, src.p_min[0], src.p_max[0], mode)
            states[label] = simulate(dsys, p, problem.d).values
        plot_states(dsys.dt, states, src.x_min[0], src.x_max[0], out / "scenarios.png", problem.name)
    print(json.dumps({"ti_violations": verdict["ti_violations"], "verdict": str(out / "verdict.json")}))
    return EXIT_UNSOUND if verdict["ti_violations"] else EXIT_OK


def sweep_archetype(name: str, rc: RcNetwork, cfg: RunConfig) -> list[MetricsRow]:
    steps = [int(round(h / cfg.dt)) for h in cfg.horizons]
    K = max(steps)
    problem = _from_network(name, rc, cfg, K)
    dsys = _discretize(problem, cfg, K)
    td = compute_td_envelope(dsys, problem.d, K).envelope
    ti = compute_ti_scalar_envelope(dsys, problem.d, K).envelope
    return [metrics_row(name, dsys, problem.d, td, ti, k) for k in steps]


def cmd_sweep(cfg: RunConfig, args) -> int:
    catalog = archetype_catalog(float(cfg.archetype.get("area", DEFAULT_AREA)),
                                float(cfg.archetype.get("power_density", DEFAULT_POWER_DENSITY)))
    per = map_ordered(lambda item: sweep_archetype(item[0], item[1], cfg), list(catalog.items()), cfg.workers)
    rows = [r for group in per for r in group]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text("\n".join([MetricsRow.HEADER] + [r.to_csv() for r in rows]) + "\n")
    verdicts = {f"{h:g}": archetype_orderings([r for r in rows if r.horizon_s == h]) for h in sorted({r.horizon_s for r in rows})}
    _dump(out / "sweep_summary.json", {"rows": len(rows), "orderings": verdicts})
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(rows, out / "reduction.png")
    print(json.dumps({"rows": len(rows), "metrics": str(out / "metrics.csv")}))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "envelope": cmd_envelope, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexenv", description="Energy-flexibility envelopes for lossy linear systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--model", help="model path or builtin:<name>; overrides the configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel solves")
        p.add_argument("--seed", type=int, help="base seed for sampling")
        p.add_argument("--scheme", choices=[s.value for s in Scheme])
        p.add_argument("--kinds", help="comma-separated envelope kinds")
        p.add_argument("--samples", type=int, help="sampled trajectories per kind (verify)")
        p.add_argument("--plot", action="store_true", help="also render PNG figures next to the outputs")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        "model": args.model, "out": args.out, "workers": args.workers, "seed": args.seed,
        "scheme": args.scheme, "samples": args.samples,
        "kinds": args.kinds.split(",") if args.kinds else None,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.check()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InvariantError as exc:
        print(json.dumps({"valid": False, "report": exc.report}, indent=2), file=sys.stderr)
        return EXIT_INVARIANT
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
