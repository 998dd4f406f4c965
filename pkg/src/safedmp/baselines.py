"""Potential-field comparison method.

The same primitive is integrated with an inverse-distance repulsive
coupling added to its transformation system.  The force law is the classic
gradient form

    F = eta * (1/d_s - 1/d0) * (1/d_s^2) * (x - c)/||x - c||,  d_s < d0,

with d_s the surface distance; it is reactive only, so it keeps the
primitive's speed but inherits the textbook failure modes: head-on symmetric
geometry stalls in a force balance, and steep near-contact gradients can
ring or collide.  Nothing here prevents clearance violations; they are
recorded, not avoided.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dmp
from .errors import InvalidInputError
from .safe_exec import DEFAULT_DELTA_GAMMA, DEFAULT_DT, StepRecord
from .trajectory import TimedTrajectory

DEFAULT_ETA = 0.01

#: Surface distances below this floor are treated as the floor itself.
SURFACE_DISTANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class ApfParams:
    """Repulsion gain, influence radius and per-obstacle force clamp.

    ``d0=None`` defaults the influence radius to each obstacle's clearance
    (radius plus half tube width) so both methods react at the same range;
    ``max_force=None`` defaults to ten times the attractor's peak pull over
    the path extent.
    """

    eta: float = DEFAULT_ETA
    d0: float | None = None
    max_force: float | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise InvalidInputError("eta must be non-negative (0 disables coupling)")
        if self.d0 is not None and self.d0 <= 0:
            raise InvalidInputError("d0 must be positive")
        if self.max_force is not None and self.max_force <= 0:
            raise InvalidInputError("max_force must be positive")


def default_max_force(model: dmp.DmpModel) -> float:
    extent = float(np.linalg.norm(model.g - model.x0))
    return 10.0 * model.alpha * model.beta * max(extent, 1e-6) / model.tau_nominal**2


def apf_force(
    x: np.ndarray,
    obstacles,
    t: float,
    params: ApfParams,
    delta_gamma: float = DEFAULT_DELTA_GAMMA,
    max_force: float | None = None,
) -> np.ndarray:
    """Summed repulsive acceleration from every active obstacle in range."""
    x = np.asarray(x, dtype=float)
    force = np.zeros_like(x)
    clamp = max_force if max_force is not None else params.max_force
    for obs in obstacles:
        if not obs.active(t):
            continue
        diff = x - obs.position(t)
        dist = float(np.linalg.norm(diff))
        d_surf = max(dist - obs.radius, SURFACE_DISTANCE_FLOOR)
        d0 = params.d0 if params.d0 is not None else obs.radius + 0.5 * delta_gamma
        if d_surf >= d0:
            continue
        magnitude = params.eta * (1.0 / d_surf - 1.0 / d0) / d_surf**2
        if clamp is not None:
            magnitude = min(magnitude, clamp)
        if dist < 1e-12:
            direction = np.zeros_like(x)
            direction[-1] = 1.0
        else:
            direction = diff / dist
        force += magnitude * direction
    return force


class ApfEngine:
    """Primitive plus potential-field coupling, integrated as one system.

    The measured position handed to :meth:`step` is adopted as the current
    state (so impulses displace the integration directly); with eta
    effectively zero the run reproduces the nominal rollout bit for bit.
    """

    method = "dmp-apf"

    def __init__(
        self,
        model: dmp.DmpModel,
        params: ApfParams | None = None,
        obstacles=(),
        dt: float = DEFAULT_DT,
        goal_tol: float = dmp.DEFAULT_GOAL_TOL,
        delta_gamma: float = DEFAULT_DELTA_GAMMA,
        nominal_reference: TimedTrajectory | None = None,
    ):
        if dt <= 0:
            raise InvalidInputError("dt must be positive")
        self.model = model
        self.params = params if params is not None else ApfParams()
        self.obstacles = tuple(obstacles)
        self.dt = dt
        self.goal_tol = goal_tol
        self.delta_gamma = delta_gamma
        self.state = dmp.initial_state(model)
        self.records: list[StepRecord] = []
        self.step_seconds: list[float] = []
        self._max_force = (
            self.params.max_force
            if self.params.max_force is not None
            else default_max_force(model)
        )
        self._nominal = nominal_reference

    def initial_position(self) -> np.ndarray:
        return self.model.x0.copy()

    def goal_distance(self) -> float:
        return float(np.linalg.norm(self.state.x - self.model.g))

    def control(self, x_measured: np.ndarray, t: float) -> np.ndarray:
        model = self.model
        state = self.state
        state.x = np.asarray(x_measured, dtype=float)
        f_ext = dmp.forcing(model, state.z)
        f_apf = apf_force(
            state.x, self.obstacles, t, self.params,
            delta_gamma=self.delta_gamma, max_force=self._max_force,
        )
        f_total = f_ext + f_apf * state.tau**2
        accel = dmp.transformation_accel(model, state, f_total)
        state.z = dmp.phase_step(state.z, state.tau, self.dt, model.alpha_z)
        dmp.integrate_step(state, accel, self.dt)
        return state.x

    def step(self, x_measured: np.ndarray, t: float) -> np.ndarray:
        start = time.perf_counter()
        x_next = self.control(x_measured, t)
        self.step_seconds.append(time.perf_counter() - start)
        k = len(self.records)
        if self._nominal is not None and k < self._nominal.n:
            x_nominal = self._nominal.points[k]
        elif self._nominal is not None:
            x_nominal = self._nominal.points[-1]
        else:
            x_nominal = x_measured
        self.records.append(
            StepRecord(
                t=t,
                x_nominal=np.asarray(x_nominal, dtype=float).copy(),
                x_target=np.asarray(x_measured, dtype=float).copy(),
                x_safe=np.asarray(x_measured, dtype=float).copy(),
                x_desired=np.asarray(x_next, dtype=float).copy(),
                x_measured=np.asarray(x_measured, dtype=float).copy(),
                tau=self.state.tau,
                z=self.state.z,
                min_clearance=self._min_surface_clearance(x_measured, t),
                u_stt=np.zeros(self.model.d),
            )
        )
        return x_next

    def _min_surface_clearance(self, x: np.ndarray, t: float) -> float:
        best = float("inf")
        for obs in self.obstacles:
            if obs.active(t):
                best = min(best, obs.surface_distance(x, t))
        return best


def dmp_apf_run(
    model: dmp.DmpModel,
    obstacles=(),
    perturbations=(),
    params: ApfParams | None = None,
    dt: float = DEFAULT_DT,
    goal_tol: float = dmp.DEFAULT_GOAL_TOL,
    max_steps: int | None = None,
    delta_gamma: float = DEFAULT_DELTA_GAMMA,
    nominal_reference: TimedTrajectory | None = None,
):
    """Convenience wrapper: build an :class:`ApfEngine` and run it."""
    from .safe_exec import IdealPlant, run

    engine = ApfEngine(
        model,
        params=params,
        obstacles=obstacles,
        dt=dt,
        goal_tol=goal_tol,
        delta_gamma=delta_gamma,
        nominal_reference=nominal_reference,
    )
    return run(
        engine,
        plant=IdealPlant(),
        perturbations=perturbations,
        max_steps=max_steps,
        goal_tol=goal_tol,
    )
