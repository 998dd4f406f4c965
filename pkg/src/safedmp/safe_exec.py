"""Real-time execution loop: primitive prediction, clearance rerouting,
tube modulation, adaptive timing and a simulated positioning plant.

Each control step advances the internal primitive, predicts the next nominal
point, projects it out of any obstacle's clearance sphere (radius plus half
the tube width), adds the tube correction computed from the measured
position, and projects the final command again so that what is issued can
never penetrate a clearance sphere.  The internal primitive never sees the
obstacles; deviations feed back only through the time-dilation coupling, so
execution slows down while the measured motion detours and re-converges.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dmp, stt
from .errors import (
    DegeneratePhaseError,
    InvalidInputError,
    PhaseStepError,
    SafetyInfeasibleError,
)

DEFAULT_DT = 0.005
DEFAULT_DELTA_GAMMA = 0.1
DEFAULT_STT_GAIN = 5e-4
DEFAULT_CLIP_LIMIT = 0.99

#: Slack allowed when verifying a projected point against a clearance sphere.
PROJECTION_TOL = 1e-9


@dataclass(frozen=True)
class Obstacle:
    """Sphere with optional constant drift and activity window.

    The sphere is the shipped geometry.  :func:`reroute` only relies on the
    ``active``, ``clearance_distance`` and ``project_to_clearance`` methods,
    so other shapes can be dropped in by implementing the same trio with a
    signed-distance query in place of the center-distance arithmetic (the
    execution engine additionally specializes spheres for speed).
    """

    center0: np.ndarray
    radius: float
    velocity: np.ndarray | None = None
    active_window: tuple[float, float] | None = None

    def __post_init__(self):
        center0 = np.asarray(self.center0, dtype=float).copy()
        velocity = (
            np.zeros_like(center0)
            if self.velocity is None
            else np.asarray(self.velocity, dtype=float).copy()
        )
        if center0.ndim != 1 or velocity.shape != center0.shape:
            raise InvalidInputError("center0 and velocity must be matching vectors")
        if self.radius <= 0:
            raise InvalidInputError("obstacle radius must be positive")
        if self.active_window is not None:
            t0, t1 = self.active_window
            if not t0 < t1:
                raise InvalidInputError("active_window must satisfy t_start < t_end")
            object.__setattr__(self, "active_window", (float(t0), float(t1)))
        center0.flags.writeable = False
        velocity.flags.writeable = False
        object.__setattr__(self, "center0", center0)
        object.__setattr__(self, "velocity", velocity)

    @property
    def d(self) -> int:
        return self.center0.shape[0]

    def active(self, t: float) -> bool:
        if self.active_window is None:
            return True
        t0, t1 = self.active_window
        return t0 <= t <= t1

    def position(self, t: float) -> np.ndarray:
        """Center at time t; inactive obstacles report an infinity sentinel."""
        if not self.active(t):
            return np.full(self.d, np.inf)
        return self.center0 + self.velocity * t

    def surface_distance(self, x: np.ndarray, t: float) -> float:
        return float(np.linalg.norm(x - self.position(t)) - self.radius)

    def clearance_distance(self, x: np.ndarray, t: float, delta_gamma: float) -> float:
        """Signed distance to the clearance region (negative inside)."""
        return self.surface_distance(x, t) - 0.5 * delta_gamma

    def project_to_clearance(
        self,
        x: np.ndarray,
        t: float,
        delta_gamma: float,
        fallback_dir: np.ndarray,
    ) -> np.ndarray:
        """Nearest point on the clearance boundary, radially from the center."""
        center = self.position(t)
        clearance = self.radius + 0.5 * delta_gamma
        offset = x - center
        dist = float(np.linalg.norm(offset))
        if dist < 1e-12:
            return center + fallback_dir * clearance
        return center + offset * (clearance / dist)


def obstacle_position(obs: Obstacle, t: float) -> np.ndarray:
    """Center of ``obs`` at time ``t`` (infinity sentinel while inactive)."""
    return obs.position(t)


@dataclass(frozen=True)
class SafetyParams:
    """Tube configuration: width, boundary-repulsion gain and clip limit.

    Each obstacle claims a clearance region of its radius plus half the tube
    width; that single threshold both triggers and bounds the rerouting.
    """

    delta_gamma: float = DEFAULT_DELTA_GAMMA
    gain: float = DEFAULT_STT_GAIN
    clip_limit: float = DEFAULT_CLIP_LIMIT

    def __post_init__(self):
        if self.delta_gamma <= 0:
            raise InvalidInputError("delta_gamma must be positive")
        if self.gain <= 0:
            raise InvalidInputError("gain must be positive")
        if not 0.0 < self.clip_limit < 1.0:
            raise InvalidInputError("clip_limit must lie in (0, 1)")

    def clearance(self, obs: Obstacle) -> float:
        return obs.radius + 0.5 * self.delta_gamma


@dataclass(frozen=True)
class StepRecord:
    """One control-loop sample of every trajectory the engine tracks."""

    t: float
    x_nominal: np.ndarray
    x_target: np.ndarray
    x_safe: np.ndarray
    x_desired: np.ndarray
    x_measured: np.ndarray
    tau: float
    z: float
    min_clearance: float
    u_stt: np.ndarray


@dataclass
class ExecutionLog:
    """Per-step records plus run-level outcome flags and step timing."""

    records: list[StepRecord]
    converged: bool
    safety_infeasible: bool
    dt: float
    goal: np.ndarray
    wall_time_mean: float
    wall_time_p99: float

    @property
    def steps(self) -> int:
        return len(self.records)

    def time_to_goal(self) -> float:
        """Duration until convergence; inf when the run did not converge."""
        if not self.converged or not self.records:
            return math.inf
        return self.records[-1].t + self.dt

    def measured_positions(self) -> np.ndarray:
        return np.asarray([r.x_measured for r in self.records])

    def times(self) -> np.ndarray:
        return np.asarray([r.t for r in self.records])

    def min_surface_clearance(self) -> float:
        return min((r.min_clearance for r in self.records), default=math.inf)


def reroute(
    x_target: np.ndarray,
    obstacles,
    t: float,
    delta_gamma: float,
    fallback_dir: np.ndarray | None = None,
) -> np.ndarray:
    """Project a target out of any breached clearance region.

    Each active obstacle claims a clearance region (for spheres: radius plus
    half the tube width around the center); a target strictly inside the
    deepest-violated region is moved onto its boundary and re-checked
    against the rest for up to d+1 passes.  A target with no projection
    direction (e.g. exactly at a sphere center) is pushed along
    ``fallback_dir`` (the caller's last motion direction, or +z when
    unavailable).  Works with any obstacle object exposing ``active``,
    ``clearance_distance`` and ``project_to_clearance``.
    """
    point = np.asarray(x_target, dtype=float)
    d = point.shape[0]
    active = [o for o in obstacles if o.active(t)]
    if not active:
        return point
    if fallback_dir is None:
        fallback_dir = np.zeros(d)
        fallback_dir[-1] = 1.0
    else:
        fallback_dir = np.asarray(fallback_dir, dtype=float)
        norm = np.linalg.norm(fallback_dir)
        if norm < 1e-12:
            fallback_dir = np.zeros(d)
            fallback_dir[-1] = 1.0
        else:
            fallback_dir = fallback_dir / norm

    def worst_violation(p):
        gap, offender = math.inf, None
        for obs in active:
            dist = obs.clearance_distance(p, t, delta_gamma)
            if dist < gap:
                gap, offender = dist, obs
        return gap, offender

    for _ in range(d + 1):
        gap, offender = worst_violation(point)
        if not gap < 0.0:
            return point
        point = offender.project_to_clearance(point, t, delta_gamma, fallback_dir)
    if worst_violation(point)[0] < -PROJECTION_TOL:
        raise SafetyInfeasibleError(
            "clearance regions overlap; no collision-free projection found"
        )
    return point


def stt_modulation(
    x_measured: np.ndarray,
    x_safe: np.ndarray,
    params: SafetyParams,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Tube correction around ``x_safe``: velocity ``u`` and step ``u * dt``.

    Delegates to the tube law with a fixed-width symmetric tube centered at
    the safe point, so per dimension ``e = (x_meas - x_safe)/(delta_gamma/2)``
    clipped, and ``u = -gain * 4/(delta_gamma (1 - e^2)) * ln((1+e)/(1-e))``.
    """
    half = 0.5 * params.delta_gamma
    u = stt.stt_control(
        x_measured, x_safe - half, x_safe + half, params.gain, params.clip_limit
    )
    return u, u * dt


class IdealPlant:
    """Positioning plant that realizes each command exactly."""

    def reset(self, x0: np.ndarray) -> None:
        pass

    def track(self, x_desired: np.ndarray) -> np.ndarray:
        return x_desired


class FirstOrderLagPlant:
    """Plant that moves a fixed fraction of the way to each command.

    Discrete first-order lag with time constant ``tau_plant``: the realized
    position converges exponentially toward a held command.
    """

    def __init__(self, tau_plant: float, dt: float):
        if tau_plant <= 0 or dt <= 0:
            raise InvalidInputError("tau_plant and dt must be positive")
        self._blend = 1.0 - math.exp(-dt / tau_plant)
        self._x = None

    def reset(self, x0: np.ndarray) -> None:
        self._x = np.asarray(x0, dtype=float).copy()

    def track(self, x_desired: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise InvalidInputError("plant must be reset before tracking")
        self._x = self._x + self._blend * (x_desired - self._x)
        return self._x.copy()


class SafeDmpEngine:
    """One scenario's closed-loop controller; owns its state and log.

    The measured position handed to :meth:`step` is compared against the
    safe target the previous command was steering to, which makes the tube
    term exactly zero under perfect tracking, and every issued command is
    itself projected clear of the clearance spheres.

    The control path is allocation-lean: obstacle geometry is packed into
    arrays once, and the tube/coupling formulas are applied inline with the
    same expressions the primitive integrator uses, so an obstacle-free run
    reproduces the nominal rollout bit for bit.
    """

    method = "safedmp"

    def __init__(
        self,
        model: dmp.DmpModel,
        safety: SafetyParams | None = None,
        obstacles=(),
        dt: float = DEFAULT_DT,
        goal_tol: float = dmp.DEFAULT_GOAL_TOL,
    ):
        if dt <= 0:
            raise InvalidInputError("dt must be positive")
        self.model = model
        self.safety = safety if safety is not None else SafetyParams()
        self.obstacles = tuple(obstacles)
        for obs in self.obstacles:
            if obs.d != model.d:
                raise InvalidInputError("obstacle dimension must match the model")
        self.dt = dt
        self.goal_tol = goal_tol
        self.state = dmp.initial_state(model)
        self.records: list[StepRecord] = []
        self.step_seconds: list[float] = []
        self._last_dir = None

        # working copies of the state as plain floats (hot-loop friendly);
        # the DmpState arrays are kept in sync on the logging side
        self._x = [float(v) for v in model.x0]
        self._v = [0.0] * model.d
        self._ec = [0.0] * model.d
        self._x_safe_prev = [float(v) for v in model.x0]

        # obstacle geometry packed for vectorized queries
        n_obs = len(self.obstacles)
        self._centers0 = np.asarray([o.center0 for o in self.obstacles]).reshape(
            n_obs, model.d
        )
        self._vels = np.asarray([o.velocity for o in self.obstacles]).reshape(
            n_obs, model.d
        )
        self._radii = np.asarray([o.radius for o in self.obstacles])
        self._clearances = self._radii + 0.5 * self.safety.delta_gamma
        self._moving = bool(n_obs) and bool(np.any(self._vels != 0.0))
        self._windows = [o.active_window for o in self.obstacles]
        self._has_windows = any(w is not None for w in self._windows)

        # scalar constants of the step formulas
        self._alpha = model.alpha
        self._beta = model.beta
        self._alpha_z = model.alpha_z
        self._alpha_e = model.alpha_e
        self._k_c = model.k_c
        self._tau_nominal = model.tau_nominal
        self._amp = model.g - model.x0
        self._widths_arr = np.asarray(model.widths)
        self._centers_arr = np.asarray(model.centers)
        self._weights_arr = np.asarray(model.weights)
        self._g_list = [float(v) for v in model.g]
        self._dt2 = dt**2
        self._half_width = 0.5 * self.safety.delta_gamma
        self._clip = self.safety.clip_limit
        self._u_scale = -4.0 * self.safety.gain / self.safety.delta_gamma
        self._obstacle_rows = [
            (
                tuple(float(v) for v in o.center0),
                tuple(float(v) for v in o.velocity),
                self.safety.clearance(o),
                o.active_window,
                bool(np.any(o.velocity != 0.0)),
            )
            for o in self.obstacles
        ]
        # fast scan table when nothing moves and no activity windows exist
        self._static_rows = None
        if self.obstacles and not any(
            row[3] is not None or row[4] for row in self._obstacle_rows
        ):
            self._static_rows = [(row[0], row[2]) for row in self._obstacle_rows]

    def initial_position(self) -> np.ndarray:
        return self.model.x0.copy()

    def goal_distance(self) -> float:
        acc = 0.0
        for i in range(self.model.d):
            diff = self._x[i] - self._g_list[i]
            acc += diff * diff
        return math.sqrt(acc)

    def _obstacle_snapshot(self, t: float):
        """(centers, clearances, radii) of currently active obstacles."""
        if not self.obstacles:
            return None
        centers = self._centers0 if not self._moving else self._centers0 + self._vels * t
        if not self._has_windows:
            return centers, self._clearances, self._radii
        mask = np.asarray(
            [w is None or (w[0] <= t <= w[1]) for w in self._windows]
        )
        if not mask.any():
            return None
        return centers[mask], self._clearances[mask], self._radii[mask]

    def control(self, x_measured: np.ndarray, t: float) -> tuple:
        """One control computation; advances the internal state.

        Returns ``(x_desired, x_nominal, x_target, x_safe, u)`` where
        ``x_nominal`` is the internal primitive position at the time of the
        measurement.  Per-dimension arithmetic runs on plain floats (the
        vectors are tiny and call overhead would dominate); the expressions
        mirror the nominal integrator's term by term, so the results are
        bit-identical to a pure rollout when the tube term is zero.
        """
        state = self.state
        dt = self.dt
        dt2 = self._dt2
        d = self.model.d
        z = state.z

        # primitive prediction (same expressions as the nominal integrator)
        psi = np.exp(-self._widths_arr * (z - self._centers_arr) ** 2)
        total = psi.sum()
        if total < 1e-300:
            raise DegeneratePhaseError(f"basis does not cover phase z={z}")
        f = (self._amp * (z * (self._weights_arr @ psi) / total)).tolist()
        tau = state.tau
        tau2 = tau**2
        alpha = self._alpha
        beta = self._beta
        g = self._g_list
        x = self._x
        v = self._v
        accel = [0.0] * d
        x_target = [0.0] * d
        for i in range(d):
            a_i = (alpha * (beta * (g[i] - x[i]) - tau * v[i]) + f[i]) / tau2
            accel[i] = a_i
            x_target[i] = x[i] + v[i] * dt + (0.5 * a_i) * dt2

        # clearance screening against every active obstacle
        target_gap, w_center, w_clear, w_dist = self._worst_violation(x_target, t)
        if target_gap < 0.0:
            x_safe = list(x_target)
            self._apply_projection(x_safe, w_center, w_clear, w_dist)
            x_safe = self._project(x_safe, t)
            self._note_motion(x_safe)
        else:
            x_safe = x_target

        # tube correction around the previously commanded safe point
        clip = self._clip
        u_scale = self._u_scale
        half = self._half_width
        prev_center = self._x_safe_prev
        u = [0.0] * d
        x_desired = [0.0] * d
        shift2 = 0.0
        for i in range(d):
            e_i = (x_measured[i] - prev_center[i]) / half
            if e_i > clip:
                e_i = clip
            elif e_i < -clip:
                e_i = -clip
            u_i = u_scale * (math.log((1.0 + e_i) / (1.0 - e_i)) / (1.0 - e_i * e_i))
            u[i] = u_i
            step_i = u_i * dt
            shift2 += step_i * step_i
            x_desired[i] = x_target[i] + step_i
        if target_gap < math.sqrt(shift2):
            d_gap, dw_center, dw_clear, dw_dist = self._worst_violation(x_desired, t)
            if d_gap < 0.0:
                self._apply_projection(x_desired, dw_center, dw_clear, dw_dist)
                x_desired = self._project(x_desired, t)

        # coupling error, time dilation, phase decay, state integration
        ec = self._ec
        alpha_e = self._alpha_e
        e_new = [0.0] * d
        tau_excess = 0.0
        for i in range(d):
            e_i = ec[i] + alpha_e * ((x_measured[i] - x[i]) - ec[i]) * dt
            e_new[i] = e_i
            tau_excess += e_i * e_i
        state.tau = self._tau_nominal + self._k_c * tau_excess
        ratio = self._alpha_z * dt / state.tau
        if ratio >= 1.0:
            raise PhaseStepError(
                f"alpha_z*dt/tau = {ratio:.3g} >= 1 would drive the phase past zero"
            )
        state.z = z * (1.0 - ratio)

        x_nominal = x
        self._ec = e_new
        self._x = x_target
        self._v = [v[i] + accel[i] * dt for i in range(d)]
        self._x_safe_prev = x_safe
        return x_desired, x_nominal, x_target, x_safe, u

    def _worst_violation(self, point, t: float):
        """(min gap, offending center, clearance, distance) over active obstacles."""
        gap_min = math.inf
        worst = (None, 0.0, 0.0)
        sqrt = math.sqrt
        if self._static_rows is not None:
            for center, clearance in self._static_rows:
                acc = 0.0
                for pi, ci in zip(point, center):
                    diff = pi - ci
                    acc += diff * diff
                dist = sqrt(acc)
                gap = dist - clearance
                if gap < gap_min:
                    gap_min = gap
                    worst = (center, clearance, dist)
            return gap_min, worst[0], worst[1], worst[2]
        d = len(point)
        for center0, vel, clearance, window, moves in self._obstacle_rows:
            if window is not None and not window[0] <= t <= window[1]:
                continue
            if moves:
                center = tuple(center0[i] + vel[i] * t for i in range(d))
            else:
                center = center0
            acc = 0.0
            for i in range(d):
                diff = point[i] - center[i]
                acc += diff * diff
            dist = sqrt(acc)
            gap = dist - clearance
            if gap < gap_min:
                gap_min = gap
                worst = (center, clearance, dist)
        return gap_min, worst[0], worst[1], worst[2]

    def _min_gap(self, point, t: float) -> float:
        return self._worst_violation(point, t)[0]

    def _apply_projection(self, point: list, center, clearance: float, dist: float):
        d = len(point)
        if dist < 1e-12:
            fallback = self._fallback_dir()
            for i in range(d):
                point[i] = center[i] + fallback[i] * clearance
        else:
            for i in range(d):
                point[i] = center[i] + (point[i] - center[i]) / dist * clearance

    def _project(self, point: list, t: float) -> list:
        """Scalarized twin of :func:`reroute`; mutates and returns ``point``."""
        d = len(point)
        for _ in range(d + 1):
            gap, center, clearance, dist = self._worst_violation(point, t)
            if not gap < 0.0:
                return point
            self._apply_projection(point, center, clearance, dist)
        if self._min_gap(point, t) < -PROJECTION_TOL:
            raise SafetyInfeasibleError(
                "clearance spheres overlap; no collision-free projection found"
            )
        return point

    def _note_motion(self, x_safe) -> None:
        d = len(x_safe)
        motion = [x_safe[i] - self._x_safe_prev[i] for i in range(d)]
        norm = math.sqrt(sum(m * m for m in motion))
        if norm > 1e-12:
            self._last_dir = [m / norm for m in motion]

    def _fallback_dir(self):
        if self._last_dir is not None:
            return self._last_dir
        fallback = [0.0] * self.model.d
        fallback[-1] = 1.0
        return fallback

    def step(self, x_measured, t: float) -> np.ndarray:
        """Timed control computation plus log record; returns the command."""
        start = time.perf_counter()
        x_desired, x_nominal, x_target, x_safe, u = self.control(x_measured, t)
        self.step_seconds.append(time.perf_counter() - start)
        state = self.state
        state.x = np.asarray(self._x)
        state.v = np.asarray(self._v)
        state.e_couple = np.asarray(self._ec)
        self.records.append(
            StepRecord(
                t=t,
                x_nominal=np.asarray(x_nominal, dtype=float),
                x_target=np.asarray(x_target, dtype=float),
                x_safe=np.asarray(x_safe, dtype=float),
                x_desired=np.asarray(x_desired, dtype=float),
                x_measured=np.asarray(x_measured, dtype=float).copy(),
                tau=state.tau,
                z=state.z,
                min_clearance=self._min_surface_clearance(x_measured, t),
                u_stt=np.asarray(u, dtype=float),
            )
        )
        return np.asarray(x_desired)

    def _min_surface_clearance(self, x: np.ndarray, t: float) -> float:
        snapshot = self._obstacle_snapshot(t)
        if snapshot is None:
            return math.inf
        centers, _, radii = snapshot
        diffs = x - centers
        dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
        return float(np.min(dists - radii))


def run(
    engine,
    plant=None,
    perturbations=(),
    max_steps: int | None = None,
    goal_tol: float | None = None,
) -> ExecutionLog:
    """Drive an engine against a simulated plant until the goal or a cap.

    The plant realizes each command one control period later; perturbations
    displace the measured position for exactly one step.  Safety
    infeasibility flags the log and stops the run instead of propagating.
    """
    if plant is None:
        plant = IdealPlant()
    dt = engine.dt
    model = engine.model
    if max_steps is None:
        max_steps = max(1, int(round(dmp.DEFAULT_HORIZON_FACTOR * model.tau_nominal / dt)))
    if goal_tol is None:
        goal_tol = engine.goal_tol

    offsets: dict[int, np.ndarray] = {}
    for pert in perturbations:
        k = int(math.ceil(pert.t_apply / dt - 1e-9))
        offsets[k] = offsets.get(k, 0.0) + np.asarray(pert.offset, dtype=float)

    x_measured = engine.initial_position()
    if 0 in offsets:
        x_measured = x_measured + offsets[0]
    plant.reset(engine.initial_position())

    converged = False
    infeasible = False
    for k in range(max_steps):
        try:
            x_desired = engine.step(x_measured, k * dt)
        except SafetyInfeasibleError:
            infeasible = True
            break
        x_measured = plant.track(x_desired)
        if k + 1 in offsets:
            x_measured = x_measured + offsets[k + 1]
        if (
            engine.goal_distance() <= goal_tol
            and np.linalg.norm(x_measured - model.g) <= goal_tol
        ):
            converged = True
            break

    seconds = engine.step_seconds
    return ExecutionLog(
        records=engine.records,
        converged=converged,
        safety_infeasible=infeasible,
        dt=dt,
        goal=model.g.copy(),
        wall_time_mean=float(np.mean(seconds)) if seconds else 0.0,
        wall_time_p99=float(np.percentile(seconds, 99)) if seconds else 0.0,
    )
