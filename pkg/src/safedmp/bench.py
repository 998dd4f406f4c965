"""Scenario construction, execution metrics and the method comparison grid.

Metrics follow the harness conventions: trajectory error is the mean
absolute per-dimension deviation after resampling both trajectories to the
reference length, re-convergence requires a dwell below tolerance, and the
obstacle-avoidance overhead is the extra time to goal per obstacle.  All
metrics are deterministic given (scenario, seed, platform); wall-clock
timing is measured separately and never enters deterministic reports by
default.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, dmp, safe_exec, trajectory
from .errors import InvalidInputError, UndefinedMetricError

SCHEMA_VERSION = 1

DEFAULT_RECONVERGENCE_TOL = 0.005
DEFAULT_RECONVERGENCE_DWELL = 10
DEFAULT_PERTURBATION_MAGNITUDE = 0.05
DEFAULT_PERTURBATION_FRACTIONS = (0.25, 0.60)

METHODS = ("safedmp", "dmp-apf")


@dataclass(frozen=True)
class Perturbation:
    """Displacement added to the measured position for one control step."""

    t_apply: float
    offset: np.ndarray

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=float).copy()
        if offset.ndim != 1 or not np.all(np.isfinite(offset)):
            raise InvalidInputError("offset must be a finite vector")
        if self.t_apply < 0:
            raise InvalidInputError("t_apply must be non-negative")
        offset.flags.writeable = False
        object.__setattr__(self, "offset", offset)


@dataclass(frozen=True)
class PreprocessOptions:
    resample_n: int = trajectory.DEFAULT_RESAMPLE_N
    cutoff_hz: float = trajectory.DEFAULT_CUTOFF_HZ
    z_height: float = trajectory.DEFAULT_Z_HEIGHT
    rotation: tuple | None = None

    def rotation_matrix(self) -> np.ndarray | None:
        if self.rotation is None:
            return None
        return np.asarray(self.rotation, dtype=float).reshape(3, 3)


@dataclass(frozen=True)
class ExecutionOptions:
    goal_tol: float = dmp.DEFAULT_GOAL_TOL
    max_horizon_factor: float = dmp.DEFAULT_HORIZON_FACTOR
    plant: str = "ideal"
    plant_tau: float = 0.05

    def __post_init__(self):
        if self.plant not in ("ideal", "first-order-lag"):
            raise InvalidInputError(f"unknown plant kind {self.plant!r}")


@dataclass(frozen=True)
class Scenario:
    """Benchmark input: demonstration source, environment and parameters."""

    name: str = "scenario"
    demo_source: str = "builtin:sshape"
    method: str = "safedmp"
    dt: float = safe_exec.DEFAULT_DT
    rng_seed: int = 0
    obstacles: tuple = ()
    perturbations: tuple = ()
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    dmp_alpha: float = dmp.DEFAULT_ALPHA
    dmp_n_basis: int = dmp.DEFAULT_N_BASIS
    safety: safe_exec.SafetyParams = field(default_factory=safe_exec.SafetyParams)
    apf: baselines.ApfParams = field(default_factory=baselines.ApfParams)
    execution: ExecutionOptions = field(default_factory=ExecutionOptions)

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "perturbations", tuple(self.perturbations))


@dataclass
class MetricsReport:
    """Quantitative summary of one (method, scenario) execution."""

    exec_time_mean_s: float | None
    exec_time_p99_s: float | None
    mae_nominal_m: float | None
    mae_perturbed_m: float | None
    conv_time_perturb_s: float | None
    conv_time_oa_s: float | None
    collision_count: int
    min_clearance_m: float | None
    oscillation_flag: bool
    converged: bool


# --- core metrics ---------------------------------------------------------------

def mae(
    executed: trajectory.TimedTrajectory,
    reference: trajectory.TimedTrajectory,
) -> float:
    """Mean absolute deviation per sample and dimension after alignment.

    Both trajectories are uniformly resampled to the reference length, so
    inputs of different durations are compared fraction-of-duration-wise.
    """
    if executed.d != reference.d:
        raise InvalidInputError(
            f"dimension mismatch: executed d={executed.d}, reference d={reference.d}"
        )
    n = reference.n
    a = trajectory.resample(executed, n).points
    b = trajectory.resample(reference, n).points
    return float(np.mean(np.abs(a - b)))


def _deviation_from_nominal(
    log: safe_exec.ExecutionLog, nominal: trajectory.TimedTrajectory
) -> np.ndarray:
    times = log.times()
    measured = log.measured_positions()
    ref = np.empty_like(measured)
    for i in range(nominal.d):
        ref[:, i] = np.interp(times, nominal.times, nominal.points[:, i])
    return np.linalg.norm(measured - ref, axis=1)


def convergence_time_perturb(
    log: safe_exec.ExecutionLog,
    nominal: trajectory.TimedTrajectory,
    perturbations,
    tol: float = DEFAULT_RECONVERGENCE_TOL,
    dwell: int = DEFAULT_RECONVERGENCE_DWELL,
) -> float:
    """Mean time from each impulse until the path re-joins the nominal one.

    Re-joining requires the deviation to stay below ``tol`` for ``dwell``
    consecutive samples; an impulse that never re-converges contributes
    infinity to the mean.
    """
    perturbations = list(perturbations)
    if not perturbations:
        raise UndefinedMetricError("scenario has no perturbations")
    deviation = _deviation_from_nominal(log, nominal)
    times = log.times()
    below = deviation < tol
    results = []
    for pert in perturbations:
        t_apply = pert.t_apply
        candidates = np.nonzero(times >= t_apply - 1e-12)[0]
        found = math.inf
        for idx in candidates:
            window = below[idx: idx + dwell]
            if window.size == 0:
                break
            if window.all() and (window.size == dwell or bool(below[idx:].all())):
                found = times[idx] - t_apply
                break
        results.append(max(found, 0.0))
    return float(np.mean(results))


def convergence_time_oa(
    log_with_obstacles: safe_exec.ExecutionLog,
    log_nominal: safe_exec.ExecutionLog,
    n_obstacles: int,
) -> float:
    """Extra time to goal attributable to avoidance, per obstacle."""
    if n_obstacles == 0:
        return 0.0
    if not (log_with_obstacles.converged and log_nominal.converged):
        raise UndefinedMetricError(
            "convergence_time_oa needs both runs to have converged"
        )
    delta = log_with_obstacles.time_to_goal() - log_nominal.time_to_goal()
    return max(0.0, delta) / n_obstacles


def collision_count(log: safe_exec.ExecutionLog) -> int:
    """Number of samples whose measured position penetrates an obstacle."""
    return int(sum(1 for r in log.records if r.min_clearance < 0.0))


def oscillation_flag(
    log: safe_exec.ExecutionLog,
    window_s: float = 0.5,
    max_reversals: int = 5,
    smooth_s: float = 0.1,
    goal_radius: float | None = None,
) -> bool:
    """Detect direction-reversal chatter away from the goal.

    A reversal is a step whose velocity opposes the moving-average velocity;
    more than ``max_reversals`` of them inside any ``window_s`` window flags
    the run.
    """
    if log.steps < 3:
        return False
    measured = log.measured_positions()
    dt = log.dt
    vel = np.diff(measured, axis=0) / dt
    # trailing average: the recent motion trend a reversal must oppose
    w = max(2, int(round(smooth_s / dt)))
    csum = np.cumsum(vel, axis=0)
    smooth = np.empty_like(vel)
    smooth[:w] = csum[:w] / np.arange(1, w + 1)[:, None]
    smooth[w:] = (csum[w:] - csum[:-w]) / w
    dots = np.einsum("ij,ij->i", vel, smooth)
    speed = np.linalg.norm(vel, axis=1)
    if goal_radius is None:
        extent = float(np.linalg.norm(log.goal - measured[0]))
        goal_radius = max(0.02, 0.05 * extent)
    away = np.linalg.norm(measured[:-1] - log.goal[None, :], axis=1) > goal_radius
    opposing = (dots < 0.0) & away & (speed > 1e-9)
    # one reversal = the onset of an opposing stretch, so a single smooth
    # turn of the path counts once however many samples it spans
    onsets = opposing & ~np.concatenate([[False], opposing[:-1]])
    window = max(1, int(round(window_s / dt)))
    counts = np.convolve(onsets.astype(float), np.ones(window), mode="valid")
    return bool(np.any(counts > max_reversals))


def stall_detected(
    log: safe_exec.ExecutionLog,
    speed_tol: float = 1e-4,
    min_duration_s: float = 1.0,
    goal_radius: float | None = None,
) -> bool:
    """True when the motion sits nearly still away from the goal for long."""
    if log.steps < 3:
        return False
    measured = log.measured_positions()
    dt = log.dt
    speed = np.linalg.norm(np.diff(measured, axis=0) / dt, axis=1)
    if goal_radius is None:
        goal_radius = 10 * dmp.DEFAULT_GOAL_TOL
    away = np.linalg.norm(measured[:-1] - log.goal[None, :], axis=1) > goal_radius
    stalled = (speed < speed_tol) & away
    needed = int(round(min_duration_s / dt))
    run_length = 0
    for flag in stalled:
        run_length = run_length + 1 if flag else 0
        if run_length >= needed:
            return True
    return False


# --- scenario execution ---------------------------------------------------------

@dataclass(frozen=True)
class PreparedScenario:
    """Model and nominal plan shared by every run of one scenario."""

    scenario: Scenario
    model: dmp.DmpModel
    demo: trajectory.TimedTrajectory
    nominal: trajectory.TimedTrajectory
    nominal_converged: bool


def prepare(scenario: Scenario) -> PreparedScenario:
    """Load and preprocess the demonstration, learn the model, roll out."""
    demo_raw = trajectory.load_demo(scenario.demo_source)
    if demo_raw.n < scenario.dmp_n_basis:
        raise InvalidInputError(
            f"demonstration has {demo_raw.n} samples; "
            f"need at least n_basis={scenario.dmp_n_basis}"
        )
    pre = scenario.preprocess
    demo = trajectory.preprocess(
        demo_raw,
        resample_n=pre.resample_n,
        cutoff_hz=pre.cutoff_hz,
        z_height=pre.z_height,
        rotation=pre.rotation_matrix(),
    )
    model = dmp.learn_from_trajectory(
        demo, n_basis=scenario.dmp_n_basis, alpha=scenario.dmp_alpha
    )
    nominal = dmp.rollout(
        model, scenario.dt, goal_tol=scenario.execution.goal_tol
    )
    horizon = scenario.execution.max_horizon_factor * model.tau_nominal
    for pert in scenario.perturbations:
        if pert.t_apply > horizon:
            raise InvalidInputError(
                f"perturbation at t={pert.t_apply} s lies beyond the "
                f"{horizon:.3g} s execution horizon"
            )
    return PreparedScenario(
        scenario=scenario,
        model=model,
        demo=demo,
        nominal=nominal.trajectory,
        nominal_converged=nominal.converged,
    )


def build_engine(prepared: PreparedScenario, method: str | None = None):
    scenario = prepared.scenario
    method = method or scenario.method
    if method == "safedmp":
        return safe_exec.SafeDmpEngine(
            prepared.model,
            safety=scenario.safety,
            obstacles=scenario.obstacles,
            dt=scenario.dt,
            goal_tol=scenario.execution.goal_tol,
        )
    if method == "dmp-apf":
        return baselines.ApfEngine(
            prepared.model,
            params=scenario.apf,
            obstacles=scenario.obstacles,
            dt=scenario.dt,
            goal_tol=scenario.execution.goal_tol,
            delta_gamma=scenario.safety.delta_gamma,
            nominal_reference=prepared.nominal,
        )
    raise InvalidInputError(f"unknown method {method!r}")


def _build_plant(scenario: Scenario):
    if scenario.execution.plant == "ideal":
        return safe_exec.IdealPlant()
    return safe_exec.FirstOrderLagPlant(scenario.execution.plant_tau, scenario.dt)


def run_scenario(
    prepared: PreparedScenario,
    method: str | None = None,
    with_perturbations: bool = True,
    with_obstacles: bool = True,
) -> safe_exec.ExecutionLog:
    scenario = prepared.scenario
    if not with_obstacles:
        scenario = replace(scenario, obstacles=())
        prepared = replace(prepared, scenario=scenario)
    engine = build_engine(prepared, method)
    max_steps = max(
        1,
        int(round(
            scenario.execution.max_horizon_factor
            * prepared.model.tau_nominal / scenario.dt
        )),
    )
    return safe_exec.run(
        engine,
        plant=_build_plant(scenario),
        perturbations=scenario.perturbations if with_perturbations else (),
        max_steps=max_steps,
        goal_tol=scenario.execution.goal_tol,
    )


def standard_perturbations(
    nominal_duration: float,
    magnitude: float = DEFAULT_PERTURBATION_MAGNITUDE,
    fractions=DEFAULT_PERTURBATION_FRACTIONS,
    direction=(0.0, 1.0, 0.0),
) -> tuple[Perturbation, ...]:
    """Impulses of fixed magnitude at fixed fractions of the nominal run."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    return tuple(
        Perturbation(t_apply=f * nominal_duration, offset=magnitude * direction)
        for f in fractions
    )


def evaluate(
    prepared: PreparedScenario,
    method: str | None = None,
    with_timing: bool = False,
) -> MetricsReport:
    """Run one (method, scenario) cell and compute every metric.

    Runs the scenario as given; when it carries perturbations an unperturbed
    twin provides the nominal-conditions error, and when it carries
    obstacles an obstacle-free twin provides the baseline time to goal.
    """
    scenario = prepared.scenario
    method = method or scenario.method
    log = run_scenario(prepared, method)

    has_perts = bool(scenario.perturbations)
    has_obstacles = bool(scenario.obstacles)

    if has_perts:
        log_unperturbed = run_scenario(prepared, method, with_perturbations=False)
    else:
        log_unperturbed = log
    if has_obstacles:
        log_free = run_scenario(
            prepared, method, with_perturbations=False, with_obstacles=False
        )
    else:
        log_free = log_unperturbed

    def measured_traj(a_log):
        return trajectory.TimedTrajectory(a_log.times(), a_log.measured_positions())

    mae_nominal = mae(measured_traj(log_unperturbed), prepared.nominal)
    mae_perturbed = mae(measured_traj(log), prepared.nominal) if has_perts else None

    if has_perts:
        conv_perturb = convergence_time_perturb(
            log, prepared.nominal, scenario.perturbations
        )
        if math.isinf(conv_perturb):
            conv_perturb = None
    else:
        conv_perturb = None

    conv_oa = None
    if has_obstacles:
        try:
            conv_oa = convergence_time_oa(
                log_unperturbed, log_free, len(scenario.obstacles)
            )
        except UndefinedMetricError:
            conv_oa = None

    min_clear = log.min_surface_clearance()
    return MetricsReport(
        exec_time_mean_s=log.wall_time_mean if with_timing else None,
        exec_time_p99_s=log.wall_time_p99 if with_timing else None,
        mae_nominal_m=mae_nominal,
        mae_perturbed_m=mae_perturbed,
        conv_time_perturb_s=conv_perturb,
        conv_time_oa_s=conv_oa,
        collision_count=collision_count(log),
        min_clearance_m=None if math.isinf(min_clear) else min_clear,
        oscillation_flag=oscillation_flag(log),
        converged=log.converged,
    )


def timing_harness(
    scenario_or_prepared,
    repetitions: int = 10_000,
    method: str | None = None,
    warmup: int = 200,
) -> tuple[float, float]:
    """Wall-clock cost of the control computation alone (mean and p99).

    Steps are timed against the plant with logging disabled; the engine is
    re-created whenever its run completes so the measured regime stays
    representative.  At least 100 measured steps are required.
    """
    if repetitions < 100:
        raise InvalidInputError("timing needs at least 100 measured steps")
    if isinstance(scenario_or_prepared, Scenario):
        prepared = prepare(scenario_or_prepared)
    else:
        prepared = scenario_or_prepared
    scenario = prepared.scenario
    method = method or scenario.method

    def fresh():
        engine = build_engine(prepared, method)
        plant = _build_plant(scenario)
        plant.reset(engine.initial_position())
        return engine, plant, engine.initial_position()

    max_steps = int(round(
        scenario.execution.max_horizon_factor
        * prepared.model.tau_nominal / scenario.dt
    ))

    engine, plant, x_measured = fresh()
    durations = np.empty(repetitions)
    measured = 0
    step_in_run = 0
    total = warmup + repetitions
    for i in range(total):
        if step_in_run >= max_steps or engine.goal_distance() <= scenario.execution.goal_tol:
            engine, plant, x_measured = fresh()
            step_in_run = 0
        t = step_in_run * scenario.dt
        start = time.perf_counter()
        result = engine.control(x_measured, t)
        elapsed = time.perf_counter() - start
        x_desired = result[0] if isinstance(result, tuple) else result
        x_measured = plant.track(x_desired)
        step_in_run += 1
        if i >= warmup:
            durations[measured] = elapsed
            measured += 1
    return float(np.mean(durations)), float(np.percentile(durations, 99))


# --- comparison grid ------------------------------------------------------------

@dataclass
class ReportRow:
    scenario: str
    method: str
    metrics: MetricsReport | None
    error: str | None = None


def compare(
    scenarios,
    methods=METHODS,
    with_timing: bool = False,
    max_workers: int = 1,
) -> list[ReportRow]:
    """Run every (method, scenario) pair; per-cell failures become rows."""
    scenarios = list(scenarios)
    prepared_cache: dict[str, PreparedScenario] = {}

    def cell(scenario, method):
        try:
            if scenario.name not in prepared_cache:
                prepared_cache[scenario.name] = prepare(scenario)
            metrics = evaluate(prepared_cache[scenario.name], method, with_timing)
            return ReportRow(scenario.name, method, metrics)
        except Exception as exc:  # recorded, not fatal
            return ReportRow(scenario.name, method, None, error=str(exc))

    jobs = [(s, m) for s in scenarios for m in methods]
    if max_workers > 1:
        # Prepare sequentially (shared cache), evaluate cells in a pool.
        for scenario in scenarios:
            if scenario.name not in prepared_cache:
                try:
                    prepared_cache[scenario.name] = prepare(scenario)
                except Exception:
                    pass
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(lambda job: cell(*job), jobs))
    else:
        rows = [cell(s, m) for s, m in jobs]
    return rows


def report_to_dict(rows) -> dict:
    out_rows = []
    for row in rows:
        entry = {"scenario": row.scenario, "method": row.method, "error": row.error}
        if row.metrics is None:
            entry["metrics"] = None
        else:
            m = row.metrics
            entry["metrics"] = {
                "exec_time_mean_s": m.exec_time_mean_s,
                "exec_time_p99_s": m.exec_time_p99_s,
                "mae_nominal_m": m.mae_nominal_m,
                "mae_perturbed_m": m.mae_perturbed_m,
                "conv_time_perturb_s": m.conv_time_perturb_s,
                "conv_time_oa_s": m.conv_time_oa_s,
                "collision_count": m.collision_count,
                "min_clearance_m": m.min_clearance_m,
                "oscillation_flag": m.oscillation_flag,
                "converged": m.converged,
            }
        out_rows.append(entry)
    return {"schema_version": SCHEMA_VERSION, "rows": out_rows}


def report_to_json(rows) -> str:
    return json.dumps(report_to_dict(rows), indent=2, sort_keys=True) + "\n"


_TABLE_COLUMNS = (
    ("scenario", 28), ("method", 8), ("conv", 5), ("mae_nom", 10),
    ("mae_pert", 10), ("convT_pert", 11), ("convT_oa", 9),
    ("coll", 5), ("min_clear", 10), ("oscill", 6),
)


def _fmt(value, width):
    if value is None:
        text = "-"
    elif isinstance(value, bool):
        text = "yes" if value else "no"
    elif isinstance(value, float):
        text = f"{value:.4g}"
    else:
        text = str(value)
    return text.rjust(width)


def report_to_text(rows) -> str:
    header = " ".join(name.rjust(width) for name, width in _TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    for row in rows:
        m = row.metrics
        if m is None:
            cells = [row.scenario.rjust(28), row.method.rjust(8),
                     f"error: {row.error}"]
            lines.append(" ".join(cells))
            continue
        values = (
            row.scenario, row.method, m.converged, m.mae_nominal_m,
            m.mae_perturbed_m, m.conv_time_perturb_s, m.conv_time_oa_s,
            m.collision_count, m.min_clearance_m, m.oscillation_flag,
        )
        lines.append(" ".join(
            _fmt(v, w) for v, (_, w) in zip(values, _TABLE_COLUMNS)
        ))
    return "\n".join(lines) + "\n"


# --- scenario (de)serialization --------------------------------------------------

def _require_keys(data: dict, allowed: set, context: str):
    unknown = data.keys() - allowed
    if unknown:
        raise InvalidInputError(f"{context}: unknown fields {sorted(unknown)}")


def scenario_to_dict(scenario: Scenario) -> dict:
    def obstacle_dict(o):
        out = {"center": [float(v) for v in o.center0], "radius": o.radius}
        if np.any(o.velocity != 0.0):
            out["velocity"] = [float(v) for v in o.velocity]
        if o.active_window is not None:
            out["active_window"] = list(o.active_window)
        return out

    data = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "demo_source": scenario.demo_source,
        "method": scenario.method,
        "dt": scenario.dt,
        "rng_seed": scenario.rng_seed,
        "obstacles": [obstacle_dict(o) for o in scenario.obstacles],
        "perturbations": [
            {"t_apply": p.t_apply, "offset": [float(v) for v in p.offset]}
            for p in scenario.perturbations
        ],
        "preprocess": {
            "resample_n": scenario.preprocess.resample_n,
            "cutoff_hz": scenario.preprocess.cutoff_hz,
            "z_height": scenario.preprocess.z_height,
            "rotation": (
                None if scenario.preprocess.rotation is None
                else list(scenario.preprocess.rotation)
            ),
        },
        "dmp": {"alpha": scenario.dmp_alpha, "n_basis": scenario.dmp_n_basis},
        "safety": {
            "delta_gamma": scenario.safety.delta_gamma,
            "gain": scenario.safety.gain,
            "clip_limit": scenario.safety.clip_limit,
        },
        "apf": {
            "eta": scenario.apf.eta,
            "d0": scenario.apf.d0,
            "max_force": scenario.apf.max_force,
        },
        "execution": {
            "goal_tol": scenario.execution.goal_tol,
            "max_horizon_factor": scenario.execution.max_horizon_factor,
            "plant": scenario.execution.plant,
            "plant_tau": scenario.execution.plant_tau,
        },
    }
    return data


def scenario_from_dict(data: dict, name: str | None = None) -> Scenario:
    top = {
        "schema_version", "name", "demo_source", "method", "dt", "rng_seed",
        "obstacles", "perturbations", "preprocess", "dmp", "safety", "apf",
        "execution",
    }
    _require_keys(data, top, "scenario")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported scenario schema_version {version}")

    obstacles = []
    for i, o in enumerate(data.get("obstacles", [])):
        _require_keys(o, {"center", "radius", "velocity", "active_window"},
                      f"obstacles[{i}]")
        obstacles.append(safe_exec.Obstacle(
            center0=np.asarray(o["center"], dtype=float),
            radius=float(o["radius"]),
            velocity=(
                np.asarray(o["velocity"], dtype=float)
                if "velocity" in o and o["velocity"] is not None else None
            ),
            active_window=(
                tuple(o["active_window"])
                if o.get("active_window") is not None else None
            ),
        ))
    perturbations = []
    for i, p in enumerate(data.get("perturbations", [])):
        _require_keys(p, {"t_apply", "offset"}, f"perturbations[{i}]")
        perturbations.append(Perturbation(
            t_apply=float(p["t_apply"]),
            offset=np.asarray(p["offset"], dtype=float),
        ))

    pre = dict(data.get("preprocess", {}))
    _require_keys(pre, {"resample_n", "cutoff_hz", "z_height", "rotation"},
                  "preprocess")
    pre_opts = PreprocessOptions(
        resample_n=int(pre.get("resample_n", trajectory.DEFAULT_RESAMPLE_N)),
        cutoff_hz=float(pre.get("cutoff_hz", trajectory.DEFAULT_CUTOFF_HZ)),
        z_height=float(pre.get("z_height", trajectory.DEFAULT_Z_HEIGHT)),
        rotation=(
            tuple(float(v) for v in pre["rotation"])
            if pre.get("rotation") is not None else None
        ),
    )

    dmp_opts = dict(data.get("dmp", {}))
    _require_keys(dmp_opts, {"alpha", "n_basis"}, "dmp")
    safety_opts = dict(data.get("safety", {}))
    _require_keys(safety_opts, {"delta_gamma", "gain", "clip_limit"}, "safety")
    apf_opts = dict(data.get("apf", {}))
    _require_keys(apf_opts, {"eta", "d0", "max_force"}, "apf")
    exec_opts = dict(data.get("execution", {}))
    _require_keys(exec_opts, {"goal_tol", "max_horizon_factor", "plant", "plant_tau"},
                  "execution")

    return Scenario(
        name=data.get("name", name or "scenario"),
        demo_source=data.get("demo_source", "builtin:sshape"),
        method=data.get("method", "safedmp"),
        dt=float(data.get("dt", safe_exec.DEFAULT_DT)),
        rng_seed=int(data.get("rng_seed", 0)),
        obstacles=tuple(obstacles),
        perturbations=tuple(perturbations),
        preprocess=pre_opts,
        dmp_alpha=float(dmp_opts.get("alpha", dmp.DEFAULT_ALPHA)),
        dmp_n_basis=int(dmp_opts.get("n_basis", dmp.DEFAULT_N_BASIS)),
        safety=safe_exec.SafetyParams(
            delta_gamma=float(safety_opts.get("delta_gamma",
                                              safe_exec.DEFAULT_DELTA_GAMMA)),
            gain=float(safety_opts.get("gain", safe_exec.DEFAULT_STT_GAIN)),
            clip_limit=float(safety_opts.get("clip_limit",
                                             safe_exec.DEFAULT_CLIP_LIMIT)),
        ),
        apf=baselines.ApfParams(
            eta=float(apf_opts.get("eta", baselines.DEFAULT_ETA)),
            d0=(float(apf_opts["d0"]) if apf_opts.get("d0") is not None else None),
            max_force=(
                float(apf_opts["max_force"])
                if apf_opts.get("max_force") is not None else None
            ),
        ),
        execution=ExecutionOptions(
            goal_tol=float(exec_opts.get("goal_tol", dmp.DEFAULT_GOAL_TOL)),
            max_horizon_factor=float(exec_opts.get("max_horizon_factor",
                                                   dmp.DEFAULT_HORIZON_FACTOR)),
            plant=exec_opts.get("plant", "ideal"),
            plant_tau=float(exec_opts.get("plant_tau", 0.05)),
        ),
    )


def load_scenario(path) -> Scenario:
    import pathlib

    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_dict(data, name=pathlib.Path(path).stem)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- randomized scenario generators ----------------------------------------------

def random_static_blocker(
    nominal: trajectory.TimedTrajectory,
    rng: np.random.Generator,
    delta_gamma: float = safe_exec.DEFAULT_DELTA_GAMMA,
    radius_range=(0.03, 0.08),
    fraction_range=(0.25, 0.75),
    existing=(),
) -> safe_exec.Obstacle:
    """Sphere intersecting the nominal path, clear of its endpoints.

    The drawn sphere's clearance region is kept disjoint from those of any
    ``existing`` obstacles, so scenarios stay projection-feasible.
    """
    points = nominal.points
    x0, g = points[0], points[-1]
    for _ in range(256):
        frac = rng.uniform(*fraction_range)
        anchor = points[int(frac * (nominal.n - 1))]
        radius = rng.uniform(*radius_range)
        clearance = radius + 0.5 * delta_gamma
        offset = rng.normal(size=points.shape[1])
        offset *= rng.uniform(0.0, 0.3 * clearance) / max(np.linalg.norm(offset), 1e-12)
        center = anchor + offset
        if (
            np.linalg.norm(center - x0) <= clearance + 0.05
            or np.linalg.norm(center - g) <= clearance + 0.05
        ):
            continue
        disjoint = all(
            np.linalg.norm(center - other.center0)
            > clearance + other.radius + 0.5 * delta_gamma + 0.01
            for other in existing
        )
        if disjoint:
            return safe_exec.Obstacle(center0=center, radius=radius)
    raise InvalidInputError("could not place a blocking obstacle on this path")


def random_crossing_obstacle(
    nominal: trajectory.TimedTrajectory,
    rng: np.random.Generator,
    delta_gamma: float = safe_exec.DEFAULT_DELTA_GAMMA,
    radius_range=(0.03, 0.06),
    speed_range=(0.05, 0.25),
    fraction_range=(0.3, 0.7),
) -> safe_exec.Obstacle:
    """Constant-velocity sphere whose track crosses the path mid-run."""
    points = nominal.points
    x0, g = points[0], points[-1]
    d = points.shape[1]
    for _ in range(256):
        frac = rng.uniform(*fraction_range)
        idx = int(frac * (nominal.n - 1))
        anchor = points[idx]
        t_hit = nominal.times[idx]
        radius = rng.uniform(*radius_range)
        clearance = radius + 0.5 * delta_gamma
        direction = rng.normal(size=d)
        direction /= max(np.linalg.norm(direction), 1e-12)
        speed = rng.uniform(*speed_range)
        velocity = speed * direction
        center0 = anchor - velocity * t_hit
        # keep the moving sphere away from the goal late in the run
        late = np.linalg.norm((center0 + velocity * (t_hit + 2.0)) - g)
        if late > clearance + 0.05 and np.linalg.norm(center0 - x0) > clearance + 0.05:
            return safe_exec.Obstacle(center0=center0, radius=radius, velocity=velocity)
    raise InvalidInputError("could not construct a crossing obstacle")
