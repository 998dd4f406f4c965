"""Dynamic movement primitive: phase system, forcing term, learning, rollout.

The primitive is a critically damped second-order attractor

    tau^2 xdd = alpha * (beta * (g - x) - tau * xd) + f(z),    beta = alpha / 4

driven by a phase variable z that decays from 1 toward 0,

    tau * zd = -alpha_z * z,    alpha_z = alpha / 6,

so the learned forcing term f(z) vanishes as the goal is approached.  The
remaining gain ratios used by the execution layer are alpha_e = alpha / 10
(coupling-error filter) and k_c = 2 * alpha (time-dilation gain).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegeneratePhaseError,
    InsufficientDataError,
    InvalidInputError,
    PhaseStepError,
)
from .trajectory import DerivedKinematics, TimedTrajectory

DEFAULT_ALPHA = 25.0
DEFAULT_N_BASIS = 25
DEFAULT_GOAL_TOL = 1e-3
DEFAULT_HORIZON_FACTOR = 20.0

#: Dimensions with goal-to-start amplitude below this are left unforced.
ZERO_AMPLITUDE_TOL = 1e-9

#: Ridge factor applied to the weighted least-squares denominator.
RIDGE_FACTOR = 1e-12


def default_basis(n_basis: int, alpha_z: float) -> tuple[np.ndarray, np.ndarray]:
    """Basis centers equally spaced in time (exponentially spaced in phase).

    Widths are set from consecutive center gaps, ``h_j = 1/(2 (c_{j+1}-c_j)^2)``,
    with the last width copied, which gives heavy overlap between neighbours.
    """
    if n_basis < 2:
        raise InvalidInputError("need at least 2 basis functions")
    j = np.arange(n_basis)
    centers = np.exp(-alpha_z * j / (n_basis - 1))
    gaps = np.diff(centers)
    widths = 1.0 / (2.0 * gaps**2)
    widths = np.append(widths, widths[-1])
    return centers, widths


@dataclass(frozen=True)
class DmpModel:
    """Learned primitive: gains, basis layout, weights and endpoints.

    ``weights`` has shape (d, n_basis); ``centers`` are strictly decreasing
    in (0, 1].  The damping and phase constants are derived from ``alpha``
    (beta = alpha/4, alpha_z = alpha/6) so critical damping holds by
    construction.
    """

    d: int
    n_basis: int
    alpha: float
    tau_nominal: float
    x0: np.ndarray
    g: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).copy()
        g = np.asarray(self.g, dtype=float).copy()
        centers = np.asarray(self.centers, dtype=float).copy()
        widths = np.asarray(self.widths, dtype=float).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        if x0.shape != (self.d,) or g.shape != (self.d,):
            raise InvalidInputError("x0 and g must have shape (d,)")
        if centers.shape != (self.n_basis,) or widths.shape != (self.n_basis,):
            raise InvalidInputError("centers and widths must have shape (n_basis,)")
        if weights.shape != (self.d, self.n_basis):
            raise InvalidInputError("weights must have shape (d, n_basis)")
        if self.alpha <= 0 or self.tau_nominal <= 0:
            raise InvalidInputError("alpha and tau_nominal must be positive")
        if np.any(centers <= 0) or np.any(centers > 1) or np.any(np.diff(centers) >= 0):
            raise InvalidInputError("centers must be strictly decreasing in (0, 1]")
        if np.any(widths <= 0):
            raise InvalidInputError("widths must be positive")
        for name, arr in (
            ("x0", x0), ("g", g), ("centers", centers),
            ("widths", widths), ("weights", weights),
        ):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def beta(self) -> float:
        return self.alpha / 4.0

    @property
    def alpha_z(self) -> float:
        return self.alpha / 6.0

    @property
    def alpha_e(self) -> float:
        return self.alpha / 10.0

    @property
    def k_c(self) -> float:
        return 2.0 * self.alpha

    def amplitude(self) -> np.ndarray:
        return self.g - self.x0


@dataclass
class DmpState:
    """Mutable integration state; owned by a single engine instance."""

    x: np.ndarray
    v: np.ndarray
    z: float
    e_couple: np.ndarray
    tau: float


def initial_state(model: DmpModel) -> DmpState:
    return DmpState(
        x=model.x0.copy(),
        v=np.zeros(model.d),
        z=1.0,
        e_couple=np.zeros(model.d),
        tau=model.tau_nominal,
    )


def basis_activations(model: DmpModel, z: float) -> np.ndarray:
    """Gaussian activations ``psi_j = exp(-h_j (z - c_j)^2)``."""
    if not 0.0 < z <= 1.0:
        raise InvalidInputError(f"phase must lie in (0, 1], got {z}")
    return np.exp(-model.widths * (z - model.centers) ** 2)


def forcing(model: DmpModel, z: float) -> np.ndarray:
    """Phase-gated forcing ``f_i = (g_i - x0_i) * z * (psi . w_i) / sum(psi)``."""
    psi = basis_activations(model, z)
    total = psi.sum()
    if total < 1e-300:
        raise DegeneratePhaseError(f"basis does not cover phase z={z}")
    return model.amplitude() * (z * (model.weights @ psi) / total)


def target_forcing(
    demo: DerivedKinematics,
    alpha: float,
    g: np.ndarray,
    x0: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Forcing values the primitive would need to reproduce the demonstration.

    Solves the transformation equation for f at each sample:
    ``f = tau^2 xdd - alpha (beta (g - x) - tau xd)``.
    """
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    beta = alpha / 4.0
    g = np.asarray(g, dtype=float)
    return (
        tau**2 * demo.accelerations
        - alpha * (beta * (g[None, :] - demo.positions) - tau * demo.velocities)
    )


def learn_weights(
    demo: DerivedKinematics,
    n_basis: int = DEFAULT_N_BASIS,
    alpha: float = DEFAULT_ALPHA,
    tau: float = 1.0,
) -> DmpModel:
    """Fit basis weights to one demonstration by locally weighted regression.

    Samples are assumed to span [0, tau] uniformly.  Per dimension i and
    basis j the weight is the psi-weighted ridge solution of
    ``f_target ~ w * zeta`` with regressor ``zeta = z * (g_i - x0_i)``;
    dimensions with negligible amplitude keep zero weights.
    """
    n = demo.n
    if n < n_basis:
        raise InsufficientDataError(
            f"need at least n_basis={n_basis} samples, got {n}"
        )
    alpha_z = alpha / 6.0
    centers, widths = default_basis(n_basis, alpha_z)
    x0 = demo.positions[0]
    g = demo.positions[-1]
    f_target = target_forcing(demo, alpha, g, x0, tau)

    u = np.linspace(0.0, 1.0, n)
    z = np.exp(-alpha_z * u)
    psi = np.exp(-widths[None, :] * (z[:, None] - centers[None, :]) ** 2)

    weights = np.zeros((demo.d, n_basis))
    amplitude = g - x0
    for i in range(demo.d):
        if abs(amplitude[i]) < ZERO_AMPLITUDE_TOL:
            continue
        zeta = z * amplitude[i]
        lam = RIDGE_FACTOR * np.max(zeta**2)
        numer = psi.T @ (zeta * f_target[:, i])
        denom = psi.T @ (zeta**2) + lam
        weights[i] = numer / denom

    return DmpModel(
        d=demo.d,
        n_basis=n_basis,
        alpha=alpha,
        tau_nominal=tau,
        x0=x0,
        g=g,
        centers=centers,
        widths=widths,
        weights=weights,
    )


def learn_from_trajectory(
    traj: TimedTrajectory,
    n_basis: int = DEFAULT_N_BASIS,
    alpha: float = DEFAULT_ALPHA,
) -> DmpModel:
    """Differentiate a preprocessed demonstration and fit a model to it.

    The nominal time scale is the demonstration duration.
    """
    from .trajectory import finite_differences

    kin = finite_differences(traj)
    return learn_weights(kin, n_basis=n_basis, alpha=alpha, tau=traj.duration)


def phase_step(z: float, tau: float, dt: float, alpha_z: float) -> float:
    """One explicit Euler step of the phase decay: ``z' = z (1 - alpha_z dt / tau)``."""
    if not 0.0 < z <= 1.0:
        raise InvalidInputError(f"phase must lie in (0, 1], got {z}")
    if dt < 0:
        raise InvalidInputError("dt must be non-negative")
    if dt == 0.0:
        return z
    ratio = alpha_z * dt / tau
    if ratio >= 1.0:
        raise PhaseStepError(
            f"alpha_z*dt/tau = {ratio:.3g} >= 1 would drive the phase past zero"
        )
    return z * (1.0 - ratio)


def transformation_accel(
    model: DmpModel, state: DmpState, f_total: np.ndarray
) -> np.ndarray:
    """Attractor acceleration ``(alpha (beta (g - x) - tau v) + f) / tau^2``."""
    tau = state.tau
    return (
        model.alpha * (model.beta * (model.g - state.x) - tau * state.v) + f_total
    ) / tau**2


def integrate_step(state: DmpState, accel: np.ndarray, dt: float) -> DmpState:
    """Advance position with its second-order Taylor term, then velocity."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    state.x = state.x + state.v * dt + 0.5 * accel * dt**2
    state.v = state.v + accel * dt
    return state


def adapt_timing(
    state: DmpState,
    x_measured: np.ndarray,
    x_nominal: np.ndarray,
    alpha_e: float,
    k_c: float,
    tau_nominal: float,
    dt: float,
) -> DmpState:
    """Update the coupling error and re-derive the time scale.

    The coupling error is a leaky first-order filter of the tracking
    deviation, ``e' = e + alpha_e ((x_meas - x_nom) - e) dt``, so it decays
    at rate alpha_e once the deviation is gone; the time scale is
    ``tau = tau_nominal + k_c ||e||^2`` and therefore never drops below
    nominal.
    """
    if dt <= 0 or alpha_e <= 0 or k_c <= 0:
        raise InvalidInputError("dt and gains must be positive")
    deviation = x_measured - x_nominal
    state.e_couple = state.e_couple + alpha_e * (deviation - state.e_couple) * dt
    state.tau = tau_nominal + k_c * float(state.e_couple @ state.e_couple)
    return state


@dataclass(frozen=True)
class RolloutResult:
    trajectory: TimedTrajectory
    converged: bool
    steps: int


def rollout(
    model: DmpModel,
    dt: float,
    horizon: float | None = None,
    goal_tol: float = DEFAULT_GOAL_TOL,
    stop_at_goal: bool = True,
) -> RolloutResult:
    """Integrate the obstacle-free primitive from rest at x0.

    Stops once ``||x - g|| < goal_tol`` (unless ``stop_at_goal`` is False)
    or when the horizon elapses, in which case the result is flagged
    non-converged rather than raising.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if horizon is None:
        horizon = DEFAULT_HORIZON_FACTOR * model.tau_nominal
    max_steps = max(1, int(round(horizon / dt)))
    state = initial_state(model)
    positions = [state.x.copy()]
    converged = False
    for _ in range(max_steps):
        if stop_at_goal and np.linalg.norm(state.x - model.g) < goal_tol:
            converged = True
            break
        f = forcing(model, state.z)
        accel = transformation_accel(model, state, f)
        state.z = phase_step(state.z, state.tau, dt, model.alpha_z)
        integrate_step(state, accel, dt)
        positions.append(state.x.copy())
    if not converged:
        converged = bool(np.linalg.norm(state.x - model.g) < goal_tol)
    times = np.arange(len(positions)) * dt
    return RolloutResult(
        trajectory=TimedTrajectory(times, np.asarray(positions)),
        converged=converged,
        steps=len(positions) - 1,
    )


def retarget(model: DmpModel, new_x0, new_g) -> DmpModel:
    """Re-anchor the primitive to new endpoints; weights are untouched.

    Spatial scaling is implicit in the (g - x0) factor of the forcing term,
    so the rollout of the returned model is the per-dimension affine image
    of the original one.
    """
    new_x0 = np.asarray(new_x0, dtype=float)
    new_g = np.asarray(new_g, dtype=float)
    if new_x0.shape != (model.d,) or new_g.shape != (model.d,):
        raise InvalidInputError("new endpoints must have shape (d,)")
    return replace(model, x0=new_x0, g=new_g)


# --- serialization -------------------------------------------------------------

def model_to_dict(model: DmpModel) -> dict:
    return {
        "d": model.d,
        "n_basis": model.n_basis,
        "alpha": model.alpha,
        "tau_nominal": model.tau_nominal,
        "x0": [float(v) for v in model.x0],
        "g": [float(v) for v in model.g],
        "centers": [float(v) for v in model.centers],
        "widths": [float(v) for v in model.widths],
        "weights": [float(v) for v in model.weights.ravel(order="C")],
    }


def model_from_dict(data: dict) -> DmpModel:
    required = {"d", "n_basis", "alpha", "tau_nominal", "x0", "g",
                "centers", "widths", "weights"}
    missing = required - data.keys()
    if missing:
        raise InvalidInputError(f"model document missing fields: {sorted(missing)}")
    unknown = data.keys() - required
    if unknown:
        raise InvalidInputError(f"model document has unknown fields: {sorted(unknown)}")
    d = int(data["d"])
    n_basis = int(data["n_basis"])
    weights = np.asarray(data["weights"], dtype=float)
    if weights.size != d * n_basis:
        raise InvalidInputError(
            f"weights must hold d*n_basis={d * n_basis} values, got {weights.size}"
        )
    return DmpModel(
        d=d,
        n_basis=n_basis,
        alpha=float(data["alpha"]),
        tau_nominal=float(data["tau_nominal"]),
        x0=np.asarray(data["x0"], dtype=float),
        g=np.asarray(data["g"], dtype=float),
        centers=np.asarray(data["centers"], dtype=float),
        widths=np.asarray(data["widths"], dtype=float),
        weights=weights.reshape(d, n_basis),
    )


def save_model(model: DmpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> DmpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
