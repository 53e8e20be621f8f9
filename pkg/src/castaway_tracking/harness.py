"""Episode and Monte Carlo orchestration, metrics, configuration and export.

One episode step runs, in order: advance the sea, sense, local Kalman
predict/update, fleet fusion, clustering and assignment, the sequential
planning round, and finally each agent executes the first control of its
plan.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .clustering import ClusterParams, cluster_and_assign
from .coordination import MessageBus, exchange_and_fuse, planning_round
from .estimation import FilterParams, initial_estimate, predict, update, update_missed
from .planner import Plan, PlannerConfig, hover_plan
from .seaworld import TruthTable, WaveSource, generate_truth
from .sensing import CameraSpec, DetectionProfile, Measurement, in_fov, sense
from .vehicle import AgentState, VehicleParams, step as vehicle_step, validate

__all__ = [
    "ConfigError",
    "SimConfig",
    "EpisodeLog",
    "default_waves",
    "default_castaways",
    "run_episode",
    "run_monte_carlo",
    "export_episode",
    "export_summary",
    "load_summary",
    "version_string",
]


class ConfigError(ValueError):
    """Invalid simulation configuration; ``problems`` lists (field, message) pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{f}: {m}" for f, m in problems))


def default_waves() -> tuple[WaveSource, ...]:
    """A 50 m swell centred on the origin plus a weaker cross swell from the north-west."""
    return (
        WaveSource((0.0, 0.0), wavelength=50.0, wave_height=1.0, decay_rate=0.001, water_depth=500.0),
        WaveSource((-60.0, 80.0), wavelength=40.0, wave_height=0.6, decay_rate=0.002, water_depth=500.0),
    )


def default_castaways(n: int) -> list[tuple[float, float, float]]:
    """Two loose groups either side of the origin, which the default waves pull apart."""
    n_west = 1 if n < 4 else n // 2
    n_east = n - n_west
    west = [(-7.0 - 2.0 * r, 3.0 * (r - (n_west - 1) / 2), 0.0) for r in range(n_west)]
    east = [(6.0 + 2.0 * r, 3.0 * (r - (n_east - 1) / 2), 0.0) for r in range(n_east)]
    return west + east


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_agents: int = 2
    n_castaways: int = 3
    duration: float = 600.0
    dt: float = 1.0
    waves: tuple[WaveSource, ...] = field(default_factory=default_waves)
    castaway_positions: tuple[tuple[float, float, float], ...] | None = None
    zeta: float = 1.0
    camera: CameraSpec = field(default_factory=CameraSpec)
    detection: DetectionProfile = field(default_factory=DetectionProfile)
    filter: FilterParams = field(default_factory=FilterParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    placement_radius: float = 10.0
    initial_altitude: float = 50.0
    report_noise: float = 2.0
    initial_covariance: tuple[float, float, float, float] = (4.0, 4.0, 1.0, 1.0)

    def __post_init__(self):
        problems = []
        if self.n_agents < 1:
            problems.append(("n_agents", "must be >= 1"))
        if self.n_castaways < 1:
            problems.append(("n_castaways", "must be >= 1"))
        if not self.dt > 0:
            problems.append(("dt", "must be positive"))
        elif abs(round(self.duration / self.dt) * self.dt - self.duration) > 1e-9 * max(1.0, self.duration):
            problems.append(("duration", "must be an integral multiple of dt"))
        if self.duration <= 0:
            problems.append(("duration", "must be positive"))
        if not self.zeta > 0:
            problems.append(("zeta", "must be positive"))
        for name, sub in (("vehicle", self.vehicle), ("filter", self.filter)):
            if abs(sub.dt - self.dt) > 1e-12:
                problems.append((f"{name}.dt", f"must equal the simulation dt {self.dt}"))
        if self.castaway_positions is not None and len(self.castaway_positions) < self.n_castaways:
            problems.append(("castaway_positions", f"needs at least {self.n_castaways} entries"))
        if self.placement_radius < 0:
            problems.append(("placement_radius", "must be >= 0"))
        if self.report_noise < 0:
            problems.append(("report_noise", "must be >= 0"))
        if any(v <= 0 for v in self.initial_covariance):
            problems.append(("initial_covariance", "entries must be positive"))
        lo, hi = self.vehicle.workspace
        if not lo[2] <= self.initial_altitude <= hi[2]:
            problems.append(("initial_altitude", "must lie inside the vehicle workspace"))
        if problems:
            raise ConfigError(problems)

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)

    def castaway_start(self) -> list[tuple[float, float, float]]:
        if self.castaway_positions is not None:
            return [tuple(map(float, p)) for p in self.castaway_positions[: self.n_castaways]]
        return default_castaways(self.n_castaways)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    # -- JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        problems: list[tuple[str, str]] = []
        obj = _from_plain(cls, data, "", problems)
        if problems:
            raise ConfigError(problems)
        return obj

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([(str(path), str(exc))]) from exc
        if not isinstance(data, dict):
            raise ConfigError([(str(path), "config must be a JSON object")])
        return cls.from_dict(data)


_NESTED = {
    "camera": CameraSpec,
    "detection": DetectionProfile,
    "filter": FilterParams,
    "cluster": ClusterParams,
    "planner": PlannerConfig,
    "vehicle": VehicleParams,
}


def _init_fields(cls):
    return [f for f in dataclasses.fields(cls) if f.init]


def _to_plain(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in _init_fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _from_plain(cls, data, path: str, problems: list) -> Any:
    if not isinstance(data, dict):
        problems.append((path or cls.__name__, "expected an object"))
        return None
    known = {f.name for f in _init_fields(cls)}
    for key in sorted(set(data) - known):
        problems.append((f"{path}{key}", "unknown key"))
    kwargs = {}
    for key in sorted(set(data) & known):
        value = data[key]
        where = f"{path}{key}"
        if cls is SimConfig and key in _NESTED:
            value = _from_plain(_NESTED[key], value, where + ".", problems)
            if value is None:
                continue
        elif cls is SimConfig and key == "waves":
            waves = []
            for i, w in enumerate(value if isinstance(value, list) else [None]):
                wave = _from_plain(WaveSource, w, f"{where}[{i}].", problems)
                if wave is not None:
                    waves.append(wave)
            value = tuple(waves)
        elif cls is SimConfig and key == "castaway_positions" and value is not None:
            value = tuple(tuple(float(c) for c in p) for p in value)
        elif isinstance(value, list):
            value = _tupleize(value)
        kwargs[key] = value
    if cls is FilterParams and "process_noise" in kwargs:
        kwargs["process_noise"] = np.asarray(kwargs["process_noise"], dtype=float)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        problems.extend((f"{path}{f}", m) for f, m in exc.problems)
    except (TypeError, ValueError) as exc:
        problems.append((path.rstrip(".") or cls.__name__, str(exc)))
    return None


def _tupleize(v):
    return tuple(_tupleize(x) for x in v) if isinstance(v, list) else v


# ---------------------------------------------------------------------------
# episode


@dataclass
class EpisodeLog:
    """Everything recorded during one episode.

    Arrays are indexed by step first. ``estimates[s, c]`` is the fused mean
    of target ``target_ids[c]``, ``traces[s, c]`` its covariance trace and
    ``local`` holds each agent's pre-fusion posterior as
    (step, agent_id, target_id, mean, trace) tuples.
    """

    config: SimConfig
    seed: int
    target_ids: tuple[int, ...]
    truth: np.ndarray  # (S, C, 3)
    agents: np.ndarray  # (S, N, 6)
    estimates: np.ndarray  # (S, C, 4)
    traces: np.ndarray  # (S, C)
    separations: np.ndarray  # (S,) smallest pairwise agent distance, inf for N = 1
    assignments: np.ndarray  # (S, N, 2) group id and group size
    in_view: np.ndarray  # (S, N) number of targets inside each agent's footprint
    measurements: list[Measurement] = field(default_factory=list)
    plans: list[list[Plan]] = field(default_factory=list)
    local: list[tuple[int, int, int, np.ndarray, float]] = field(default_factory=list)
    violations: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.truth.shape[0]

    def summary(self) -> dict:
        err = np.linalg.norm(self.estimates[:, :, :2] - self.truth[:, :, :2], axis=-1)
        rmse = np.sqrt(np.mean(err**2, axis=0))
        degraded = sum(p.degraded for plans in self.plans for p in plans)
        tracking = self.in_view > 0
        z = self.agents[:, :, 2]
        return {
            "seed": self.seed,
            "n_agents": self.agents.shape[1],
            "n_castaways": self.truth.shape[1],
            "steps": self.n_steps,
            "avg_trace": float(np.mean(self.traces.sum(axis=1))),
            "rmse_per_target": [float(r) for r in rmse],
            "rmse": float(np.mean(rmse)),
            "min_separation": float(np.min(self.separations)),
            "min_altitude": float(np.min(z)),
            # lowest altitude flown while at least one castaway is in the footprint
            "min_tracking_altitude": float(np.min(z[tracking])) if tracking.any() else math.inf,
            "degraded_plans": int(degraded),
            "violations": len(self.violations),
        }


def _place_agents(cfg: SimConfig, centroid: np.ndarray, rng: np.random.Generator) -> list[AgentState]:
    """Uniform in a disk around ``centroid``, rejecting draws closer than the safety distance."""
    placed: list[np.ndarray] = []
    for _ in range(cfg.n_agents):
        for _attempt in range(10_000):
            r = cfg.placement_radius * math.sqrt(rng.random())
            a = 2.0 * math.pi * rng.random()
            p = np.array([centroid[0] + r * math.cos(a), centroid[1] + r * math.sin(a), cfg.initial_altitude])
            if all(np.linalg.norm(p - q) >= cfg.planner.safety_distance for q in placed):
                break
        else:
            raise ConfigError([("placement_radius", "too small to separate the agents")])
        placed.append(p)
    return [AgentState(p, np.zeros(3)) for p in placed]


def _min_separation(states: Sequence[AgentState]) -> float:
    best = math.inf
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            best = min(best, float(np.linalg.norm(states[i].position - states[j].position)))
    return best


def run_episode(cfg: SimConfig, seed: int | None = None, bus: MessageBus | None = None) -> EpisodeLog:
    """Simulate one mission. Identical (cfg, seed) give identical logs."""
    seed = cfg.seed if seed is None else int(seed)
    N, S = cfg.n_agents, cfg.n_steps
    streams = np.random.SeedSequence(seed).spawn(2 + N)
    place_rng = np.random.default_rng(streams[0])
    report_rng = np.random.default_rng(streams[1])
    sense_rngs = [np.random.default_rng(s) for s in streams[2:]]

    starts = cfg.castaway_start()
    truth: TruthTable = generate_truth(cfg.waves, starts, cfg.duration, cfg.dt)
    tids = truth.ids
    C = len(tids)

    states = _place_agents(cfg, truth.positions[0, :, :2].mean(axis=0), place_rng)
    reports = truth.positions[0, :, :2] + cfg.report_noise * report_rng.standard_normal((C, 2))
    initial = {tid: initial_estimate(tid, reports[c], cfg.initial_covariance) for c, tid in enumerate(tids)}
    banks = {i: dict(initial) for i in range(N)}
    plans = {i: hover_plan(i, states[i], cfg.planner, cfg.vehicle, -1) for i in range(N)}

    log = EpisodeLog(
        config=cfg,
        seed=seed,
        target_ids=tids,
        truth=truth.positions[:S].copy(),
        agents=np.empty((S, N, 6)),
        estimates=np.empty((S, C, 4)),
        traces=np.empty((S, C)),
        separations=np.empty(S),
        assignments=np.empty((S, N, 2), dtype=np.int64),
        in_view=np.empty((S, N), dtype=np.int64),
    )
    solver_kwargs = dict(
        cfg=cfg.planner, cam=cfg.camera, prof=cfg.detection, filter_params=cfg.filter, vehicle=cfg.vehicle
    )

    for s in range(S):
        truths = truth.at(s)
        for i, st in enumerate(states):
            log.agents[s, i] = st.as_vector()
            for v in validate(st, None, cfg.vehicle):
                log.violations.append((s, i, f"{v.kind}:{v.axis}"))
            log.in_view[s, i] = sum(in_fov(st, t.position, cfg.camera) for t in truths)
        log.separations[s] = _min_separation(states)

        # sense and filter locally
        for i in range(N):
            meas = sense(states[i], truths, cfg.camera, cfg.detection, cfg.zeta, sense_rngs[i], agent_id=i, step=s)
            log.measurements.extend(meas)
            by_target = {m.target_id: m for m in meas}
            bank = {}
            for tid in tids:
                est = banks[i][tid] if s == 0 else predict(banks[i][tid], cfg.filter)
                m = by_target.get(tid)
                if m is None:
                    est = update_missed(est)
                else:
                    est = update(est, m.value, (m.std * m.std) * np.eye(2), cfg.filter)
                bank[tid] = est
                log.local.append((s, i, tid, est.mean, est.trace))
            banks[i] = bank

        banks = exchange_and_fuse(banks, s, bus)
        fused = banks[0]
        for c, tid in enumerate(tids):
            log.estimates[s, c] = fused[tid].mean
            log.traces[s, c] = fused[tid].trace

        fleet = {i: states[i] for i in range(N)}
        assignment = cluster_and_assign([fused[t] for t in tids], fleet, cfg.filter, cfg.cluster)
        cluster_est = {}
        for i in range(N):
            g = assignment.agent_to_group[i]
            log.assignments[s, i] = (g, len(assignment.groups[g]))
            cluster_est[i] = [fused[t] for t in assignment.groups[g]]

        new_plans = planning_round(fleet, cluster_est, plans, s, bus=bus, **solver_kwargs)
        log.plans.append(new_plans)
        plans = {p.agent_id: p for p in new_plans}
        states = [vehicle_step(states[i], plans[i].controls[0], cfg.vehicle) for i in range(N)]
    return log


# ---------------------------------------------------------------------------
# Monte Carlo


def _mc_job(args) -> tuple[int, int, int, dict]:
    cfg, n_agents, n_castaways, run, seed = args
    log = run_episode(cfg.replace(n_agents=n_agents, n_castaways=n_castaways), seed)
    return n_agents, n_castaways, run, log.summary()


def run_monte_carlo(
    cfg: SimConfig,
    runs: int,
    agents: Sequence[int] | None = None,
    castaways: Sequence[int] | None = None,
    workers: int = 1,
    seed: int | None = None,
) -> dict:
    """Repeat episodes over a sweep of fleet and castaway counts.

    Run ``i`` of every sweep cell uses seed ``seed + i``. Cells are
    aggregated in sorted order, so the table is the same however the
    workers finish.
    """
    if runs < 0:
        raise ValueError("runs must be >= 0")
    seed = cfg.seed if seed is None else int(seed)
    agents = sorted(set(agents or [cfg.n_agents]))
    castaways = sorted(set(castaways or [cfg.n_castaways]))
    jobs = [(cfg, n, c, r, seed + r) for n in agents for c in castaways for r in range(runs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_job, jobs))
    else:
        results = [_mc_job(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1], r[2]))

    rows = []
    for n in agents:
        for c in castaways:
            cell = [r[3] for r in results if r[0] == n and r[1] == c]
            if not cell:
                continue
            rows.append(
                {
                    "n_agents": n,
                    "n_castaways": c,
                    "runs": len(cell),
                    "avg_trace": float(np.mean([e["avg_trace"] for e in cell])),
                    "rmse": float(np.mean([e["rmse"] for e in cell])),
                    "min_separation": float(np.min([e["min_separation"] for e in cell])),
                    "min_altitude": float(np.min([e["min_altitude"] for e in cell])),
                    "degraded_plans": int(sum(e["degraded_plans"] for e in cell)),
                    "violations": int(sum(e["violations"] for e in cell)),
                    "episodes": cell,
                }
            )
    return {"runs": runs, "seed": seed, "rows": rows}


# ---------------------------------------------------------------------------
# export


def version_string() -> str:
    return f"v{__version__}"


def _f(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _dump_json(path: Path, doc: dict) -> None:
    try:
        path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_episode(log: EpisodeLog, out_dir) -> dict[str, Path]:
    """Write one episode's tables and summary into ``out_dir``.

    Files: steps.csv (one row of fleet metrics per step), agents.csv
    (agent state and assignment per step and agent), truth.csv,
    estimates.csv (local posteriors per agent, fused ones under agent_id
    -1), measurements.csv, plans.csv and summary.json.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    S, N = log.agents.shape[:2]
    K = log.config.planner.horizon
    files = {}

    files["steps"] = out / "steps.csv"
    per_step_meas = np.bincount([m.step for m in log.measurements], minlength=S)[:S]
    _write_csv(
        files["steps"],
        ["step", "time", "sum_trace", "min_separation", "min_altitude", "measurements", "degraded_plans"],
        (
            [s, _f(s * log.config.dt), _f(log.traces[s].sum()), _f(log.separations[s]),
             _f(log.agents[s, :, 2].min()), int(per_step_meas[s]), sum(p.degraded for p in log.plans[s])]
            for s in range(S)
        ),
    )
    files["agents"] = out / "agents.csv"
    _write_csv(
        files["agents"],
        ["step", "agent_id", "x", "y", "z", "vx", "vy", "vz", "group_id", "group_size", "targets_in_view"],
        (
            [s, i, *map(_f, log.agents[s, i]), int(log.assignments[s, i, 0]), int(log.assignments[s, i, 1]),
             int(log.in_view[s, i])]
            for s in range(S) for i in range(N)
        ),
    )
    files["truth"] = out / "truth.csv"
    _write_csv(
        files["truth"],
        ["step", "castaway_id", "x", "y", "z"],
        ([s, tid, *map(_f, log.truth[s, c])] for s in range(S) for c, tid in enumerate(log.target_ids)),
    )
    files["estimates"] = out / "estimates.csv"
    fused_rows = (
        [s, -1, tid, *map(_f, log.estimates[s, c]), _f(log.traces[s, c])]
        for s in range(S) for c, tid in enumerate(log.target_ids)
    )
    local_rows = ([s, i, tid, *map(_f, mean), _f(tr)] for s, i, tid, mean, tr in log.local)
    _write_csv(
        files["estimates"],
        ["step", "agent_id", "target_id", "x", "y", "vx", "vy", "trace"],
        sorted(list(local_rows) + list(fused_rows), key=lambda r: (r[0], r[1], r[2])),
    )
    files["measurements"] = out / "measurements.csv"
    _write_csv(
        files["measurements"],
        ["step", "agent_id", "target_id", "y_x", "y_y"],
        ([m.step, m.agent_id, m.target_id, _f(m.value[0]), _f(m.value[1])] for m in log.measurements),
    )
    files["plans"] = out / "plans.csv"
    u_cols = [f"u{k}_{a}" for k in range(K) for a in "xyz"]
    _write_csv(
        files["plans"],
        ["step", "agent_id", "J", *u_cols, "degraded"],
        (
            [s, p.agent_id, _f(p.objective), *map(_f, p.controls.ravel()), int(p.degraded)]
            for s, plans in enumerate(log.plans) for p in plans
        ),
    )
    files["summary"] = out / "summary.json"
    _dump_json(
        files["summary"],
        {"version": version_string(), "config": log.config.to_dict(), "metrics": log.summary()},
    )
    return files


def export_summary(table: dict, path, cfg: SimConfig | None = None) -> Path:
    """Write a Monte Carlo table as JSON; an empty table carries ``"runs": 0``."""
    path = Path(path)
    doc = {"version": version_string(), "runs": table.get("runs", 0), "rows": table.get("rows", [])}
    if "seed" in table:
        doc["seed"] = table["seed"]
    if cfg is not None:
        doc["config"] = cfg.to_dict()
    if path.parent:
        path.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(path, doc)
    return path


def load_summary(path) -> dict:
    def restore(obj):
        if isinstance(obj, dict):
            return {k: restore(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [restore(v) for v in obj]
        if obj == "inf":
            return math.inf
        if obj == "-inf":
            return -math.inf
        return obj

    return restore(json.loads(Path(path).read_text()))
