import json
import math

import numpy as np
import pytest

from safedmp import bench, dmp
from safedmp import trajectory as tj
from safedmp.errors import (
    InsufficientDataError,
    InvalidInputError,
    PhaseStepError,
)


def zero_weight_model(d=1, x0=None, g=None, tau=1.0, alpha=25.0, n_basis=25):
    centers, widths = dmp.default_basis(n_basis, alpha / 6.0)
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    g = np.ones(d) if g is None else np.asarray(g, dtype=float)
    return dmp.DmpModel(
        d=d, n_basis=n_basis, alpha=alpha, tau_nominal=tau,
        x0=x0, g=g, centers=centers, widths=widths,
        weights=np.zeros((d, n_basis)),
    )


def random_model(seed=3, d=2, tau=1.5, scale=50.0):
    centers, widths = dmp.default_basis(25, 25.0 / 6.0)
    rng = np.random.default_rng(seed)
    return dmp.DmpModel(
        d=d, n_basis=25, alpha=25.0, tau_nominal=tau,
        x0=np.zeros(d), g=np.linspace(0.8, 0.4, d),
        centers=centers, widths=widths,
        weights=rng.uniform(-scale, scale, size=(d, 25)),
    )


class TestModelInvariants:
    def test_gain_ratios(self):
        m = zero_weight_model(alpha=25.0)
        assert m.beta == pytest.approx(25.0 / 4.0, abs=1e-12)
        assert m.alpha_z == pytest.approx(25.0 / 6.0, abs=1e-12)
        assert m.alpha_e == pytest.approx(2.5, abs=1e-12)
        assert m.k_c == pytest.approx(50.0, abs=1e-12)

    def test_basis_layout(self):
        centers, widths = dmp.default_basis(25, 25.0 / 6.0)
        assert centers[0] == 1.0
        assert np.all(centers > 0) and np.all(centers <= 1)
        assert np.all(np.diff(centers) < 0)
        assert np.all(widths > 0)
        assert widths[-1] == widths[-2]

    def test_rejects_bad_centers(self):
        with pytest.raises(InvalidInputError):
            dmp.DmpModel(
                d=1, n_basis=3, alpha=25.0, tau_nominal=1.0,
                x0=np.zeros(1), g=np.ones(1),
                centers=np.array([0.2, 0.5, 0.9]),  # increasing
                widths=np.ones(3), weights=np.zeros((1, 3)),
            )


class TestBasisActivations:
    def test_unit_at_center(self):
        m = zero_weight_model()
        for j in (0, 7, 24):
            psi = dmp.basis_activations(m, float(m.centers[j]))
            assert psi[j] == pytest.approx(1.0)

    def test_vanishes_for_large_widths(self):
        centers, _ = dmp.default_basis(5, 25.0 / 6.0)
        m = dmp.DmpModel(
            d=1, n_basis=5, alpha=25.0, tau_nominal=1.0,
            x0=np.zeros(1), g=np.ones(1), centers=centers,
            widths=np.full(5, 1e12), weights=np.zeros((1, 5)),
        )
        psi = dmp.basis_activations(m, 0.5)
        off_center = np.abs(0.5 - centers) > 1e-3
        assert np.all(psi[off_center] < 1e-30)

    def test_matches_scalar_evaluation(self):
        m = zero_weight_model()
        z = 0.5
        psi = dmp.basis_activations(m, z)
        assert psi.sum() > 0
        for j in range(m.n_basis):
            expected = math.exp(-m.widths[j] * (z - m.centers[j]) ** 2)
            assert psi[j] == pytest.approx(expected, rel=1e-14)

    def test_rejects_bad_phase(self):
        m = zero_weight_model()
        with pytest.raises(InvalidInputError):
            dmp.basis_activations(m, 0.0)
        with pytest.raises(InvalidInputError):
            dmp.basis_activations(m, 1.5)


class TestForcing:
    def test_zero_weights(self):
        m = zero_weight_model(d=3, g=[1.0, 2.0, 3.0])
        for z in (1.0, 0.5, 1e-6):
            np.testing.assert_array_equal(dmp.forcing(m, z), np.zeros(3))

    def test_zero_amplitude_dimension(self):
        m = random_model(d=2)
        m = dmp.retarget(m, [0.0, 0.3], [1.0, 0.3])  # dim 1 has g == x0
        f = dmp.forcing(m, 0.6)
        assert f[1] == 0.0

    def test_vanishes_with_phase(self):
        m = random_model()
        assert np.linalg.norm(dmp.forcing(m, 1e-9)) < 1e-6 * np.linalg.norm(
            dmp.forcing(m, 0.5)
        ) + 1e-12


class TestTargetForcing:
    def test_equilibrium_is_zero(self):
        g = np.array([0.4, -0.2])
        kin = tj.DerivedKinematics(
            positions=np.tile(g, (10, 1)),
            velocities=np.zeros((10, 2)),
            accelerations=np.zeros((10, 2)),
        )
        f = dmp.target_forcing(kin, 25.0, g, g, 1.0)
        np.testing.assert_allclose(f, 0.0, atol=1e-12)

    def test_generative_round_trip(self):
        m = random_model()
        res = dmp.rollout(m, 1e-3, horizon=m.tau_nominal, stop_at_goal=False)
        kin = tj.finite_differences(res.trajectory)
        f_target = dmp.target_forcing(kin, m.alpha, m.g, m.x0, m.tau_nominal)
        z = np.exp(-m.alpha_z * res.trajectory.times / m.tau_nominal)
        f_model = np.array([dmp.forcing(m, zk) for zk in z])
        scale = np.max(np.abs(f_model))
        assert np.max(np.abs(f_target - f_model)) < 0.05 * scale

    def test_pure_attractor_round_trip(self):
        m = zero_weight_model(d=1)
        res = dmp.rollout(m, 1e-3, horizon=m.tau_nominal, stop_at_goal=False)
        kin = tj.finite_differences(res.trajectory)
        f_target = dmp.target_forcing(kin, m.alpha, m.g, m.x0, m.tau_nominal)
        # attractor-only forcing should vanish up to discretization error
        assert np.max(np.abs(f_target)) < 0.05 * m.alpha * m.beta


class TestLearnWeights:
    def test_minjerk_fidelity(self, minjerk_demo, minjerk_model):
        res = dmp.rollout(
            minjerk_model, 1e-3, horizon=minjerk_model.tau_nominal, stop_at_goal=False
        )
        err = bench.mae(res.trajectory, minjerk_demo)
        assert err < 0.01 * minjerk_demo.bounding_box_diagonal()

    def test_recovers_generating_model(self):
        m = random_model(seed=3)
        res = dmp.rollout(m, 1e-3, horizon=m.tau_nominal, stop_at_goal=False)
        kin = tj.finite_differences(res.trajectory)
        learned = dmp.learn_weights(kin, n_basis=25, alpha=25.0, tau=m.tau_nominal)
        replay = dmp.rollout(
            learned, 1e-3, horizon=m.tau_nominal, stop_at_goal=False
        ).trajectory
        reference = res.trajectory
        assert bench.mae(replay, reference) < 1e-3

    def test_constant_demo_zero_weights(self):
        pos = np.tile([0.3, 0.4], (100, 1))
        kin = tj.DerivedKinematics(pos, np.zeros_like(pos), np.zeros_like(pos))
        m = dmp.learn_weights(kin, n_basis=25, alpha=25.0, tau=1.0)
        np.testing.assert_array_equal(m.weights, 0.0)
        res = dmp.rollout(m, 0.005, horizon=2.0, stop_at_goal=False)
        assert np.max(np.abs(res.trajectory.points - pos[0])) < 1e-12

    def test_rejects_insufficient_samples(self):
        pos = np.linspace(0, 1, 10)[:, None]
        kin = tj.DerivedKinematics(pos, np.zeros_like(pos), np.zeros_like(pos))
        with pytest.raises(InsufficientDataError):
            dmp.learn_weights(kin, n_basis=25, alpha=25.0, tau=1.0)


class TestPhaseStep:
    def test_quoted_value(self):
        assert dmp.phase_step(1.0, 1.0, 0.005, 4.0) == pytest.approx(0.98)

    def test_zero_dt_identity(self):
        assert dmp.phase_step(0.7, 1.0, 0.0, 4.0) == 0.7

    def test_monotone_decrease(self):
        z = 1.0
        for _ in range(100):
            z_next = dmp.phase_step(z, 1.0, 0.005, 25.0 / 6.0)
            assert 0.0 < z_next < z
            z = z_next

    def test_matches_exponential(self):
        alpha_z, dt, tau = 25.0 / 6.0, 0.005, 1.0
        z = 1.0
        max_rel = 0.0
        for k in range(1, int(2 * tau / (alpha_z * dt))):
            z = dmp.phase_step(z, tau, dt, alpha_z)
            exact = math.exp(-alpha_z * k * dt / tau)
            max_rel = max(max_rel, abs(z - exact) / exact)
        assert max_rel <= 2 * alpha_z * dt / tau

    def test_rejects_overlong_step(self):
        with pytest.raises(PhaseStepError):
            dmp.phase_step(1.0, 1.0, 0.5, 4.0)


class TestTransformationAccel:
    def test_fixed_point(self):
        m = zero_weight_model(d=2, g=[1.0, -1.0])
        state = dmp.DmpState(
            x=m.g.copy(), v=np.zeros(2), z=0.5, e_couple=np.zeros(2), tau=1.0
        )
        np.testing.assert_array_equal(
            dmp.transformation_accel(m, state, np.zeros(2)), np.zeros(2)
        )

    def test_restoring_direction(self):
        m = zero_weight_model(d=1)
        state = dmp.DmpState(
            x=m.g - 0.1, v=np.zeros(1), z=0.5, e_couple=np.zeros(1), tau=1.0
        )
        accel = dmp.transformation_accel(m, state, np.zeros(1))
        assert accel[0] == pytest.approx(m.alpha * m.beta * 0.1)

    def test_tau_squared_scaling(self):
        m = zero_weight_model(d=1)
        x = np.array([0.3])
        v = np.array([0.2])
        s1 = dmp.DmpState(x=x, v=v, z=0.5, e_couple=np.zeros(1), tau=1.0)
        # hold the damping term tau*v fixed while doubling tau
        s2 = dmp.DmpState(x=x, v=v / 2.0, z=0.5, e_couple=np.zeros(1), tau=2.0)
        a1 = dmp.transformation_accel(m, s1, np.zeros(1))
        a2 = dmp.transformation_accel(m, s2, np.zeros(1))
        assert a2[0] == pytest.approx(a1[0] / 4.0)


class TestIntegrateStep:
    def test_rest_identity(self):
        state = dmp.DmpState(
            x=np.array([1.0]), v=np.zeros(1), z=1.0, e_couple=np.zeros(1), tau=1.0
        )
        dmp.integrate_step(state, np.zeros(1), 0.01)
        assert state.x[0] == 1.0 and state.v[0] == 0.0

    def test_constant_acceleration_exact(self):
        state = dmp.DmpState(
            x=np.zeros(1), v=np.zeros(1), z=1.0, e_couple=np.zeros(1), tau=1.0
        )
        a = np.array([2.0])
        dt = 0.01
        for _ in range(100):
            dmp.integrate_step(state, a, dt)
        assert state.x[0] == pytest.approx(0.5 * 2.0 * (100 * dt) ** 2, rel=1e-12)

    def test_against_fine_reference(self):
        m = random_model(seed=9)
        coarse = dmp.rollout(m, 5e-3, horizon=m.tau_nominal, stop_at_goal=False)
        fine = dmp.rollout(m, 5e-4, horizon=m.tau_nominal, stop_at_goal=False)
        idx = np.arange(coarse.trajectory.n) * 10
        idx = idx[idx < fine.trajectory.n]
        dev = np.max(np.abs(
            coarse.trajectory.points[: idx.size] - fine.trajectory.points[idx]
        ))
        assert dev < 20 * 5e-3  # first-order step error


class TestRollout:
    def test_critically_damped_no_overshoot(self):
        m = zero_weight_model(d=1)
        res = dmp.rollout(m, 1e-3, horizon=6.0, stop_at_goal=False)
        x = res.trajectory.points[:, 0]
        assert np.max(x) <= 1.0 + 1e-6
        t = res.trajectory.times
        pole = m.alpha / (2.0 * m.tau_nominal)
        closed = 1.0 - (1.0 + pole * t) * np.exp(-pole * t)
        assert np.max(np.abs(x - closed)) < 5e-3

    def test_goal_convergence_random_weights(self):
        for seed in range(5):
            m = random_model(seed=seed, d=3, tau=1.0, scale=100.0)
            res = dmp.rollout(m, 0.005, horizon=10.0, stop_at_goal=False)
            assert np.linalg.norm(res.trajectory.points[-1] - m.g) < 1e-3

    def test_learned_stroke_reproduction(self, sshape_demo, sshape_model):
        res = dmp.rollout(
            sshape_model, 1e-3, horizon=sshape_model.tau_nominal, stop_at_goal=False
        )
        err = bench.mae(res.trajectory, sshape_demo)
        assert err < 0.02 * sshape_demo.bounding_box_diagonal()

    def test_nonconvergence_flagged(self):
        m = zero_weight_model(d=1, tau=10.0)
        res = dmp.rollout(m, 0.005, horizon=0.2)
        assert not res.converged


class TestAdaptTiming:
    def test_fixed_point(self):
        state = dmp.DmpState(
            x=np.zeros(2), v=np.zeros(2), z=1.0, e_couple=np.zeros(2), tau=1.0
        )
        x = np.array([0.1, 0.2])
        dmp.adapt_timing(state, x, x, 2.5, 50.0, 1.0, 0.005)
        np.testing.assert_array_equal(state.e_couple, 0.0)
        assert state.tau == 1.0

    def test_quoted_tau_value(self):
        state = dmp.DmpState(
            x=np.zeros(2), v=np.zeros(2), z=1.0,
            e_couple=np.array([0.1, 0.0]), tau=1.0,
        )
        # zero deviation and zero dt-step contribution: tau from ||e||^2 alone
        dmp.adapt_timing(state, np.zeros(2), np.zeros(2), 1e-12, 50.0, 1.0, 1e-12)
        assert state.tau == pytest.approx(1.0 + 50.0 * 0.01, rel=1e-6)

    def test_decay_after_transient(self):
        state = dmp.DmpState(
            x=np.zeros(1), v=np.zeros(1), z=1.0, e_couple=np.zeros(1), tau=1.0
        )
        dt, alpha_e = 0.005, 2.5
        # sustained deviation, then release
        for _ in range(400):
            dmp.adapt_timing(state, np.array([0.1]), np.zeros(1), alpha_e, 50.0, 1.0, dt)
        assert state.tau > 1.0
        taus = []
        for _ in range(1000):
            dmp.adapt_timing(state, np.zeros(1), np.zeros(1), alpha_e, 50.0, 1.0, dt)
            taus.append(state.tau)
        assert all(t2 <= t1 for t1, t2 in zip(taus, taus[1:]))
        assert taus[-1] - 1.0 < 1e-3
        assert all(t >= 1.0 for t in taus)


class TestRetarget:
    def test_identity(self, sshape_model):
        same = dmp.retarget(sshape_model, sshape_model.x0, sshape_model.g)
        a = dmp.rollout(same, 0.005).trajectory
        b = dmp.rollout(sshape_model, 0.005).trajectory
        np.testing.assert_array_equal(a.points, b.points)

    def test_affine_equivariance(self):
        m = random_model(seed=5, d=2)
        new_x0 = np.array([0.2, -0.1])
        new_g = np.array([1.8, 0.7])
        moved = dmp.retarget(m, new_x0, new_g)
        base = dmp.rollout(m, 1e-3, horizon=m.tau_nominal, stop_at_goal=False).trajectory
        mapped = dmp.rollout(
            moved, 1e-3, horizon=m.tau_nominal, stop_at_goal=False
        ).trajectory
        scale = (new_g - new_x0) / (m.g - m.x0)
        expected = new_x0 + (base.points - m.x0) * scale
        assert np.max(np.abs(mapped.points - expected)) < 1e-3 * np.max(
            np.abs(expected - new_x0)
        )

    def test_double_amplitude_1d(self):
        m = random_model(seed=8, d=1)
        doubled = dmp.retarget(m, m.x0, m.x0 + 2.0 * (m.g - m.x0))
        base = dmp.rollout(m, 1e-3, horizon=m.tau_nominal, stop_at_goal=False).trajectory
        big = dmp.rollout(
            doubled, 1e-3, horizon=m.tau_nominal, stop_at_goal=False
        ).trajectory
        expected = m.x0 + 2.0 * (base.points - m.x0)
        np.testing.assert_allclose(big.points, expected, atol=1e-9)

    def test_collapsed_dimension_constant(self):
        m = random_model(seed=2, d=2)
        flat = dmp.retarget(m, m.x0, np.array([m.g[0], m.x0[1]]))
        res = dmp.rollout(flat, 0.005, horizon=flat.tau_nominal, stop_at_goal=False)
        np.testing.assert_allclose(res.trajectory.points[:, 1], m.x0[1], atol=1e-12)


class TestSerialization:
    def test_round_trip(self, sshape_model, tmp_path):
        path = tmp_path / "model.json"
        dmp.save_model(sshape_model, path)
        back = dmp.load_model(path)
        np.testing.assert_array_equal(back.weights, sshape_model.weights)
        np.testing.assert_array_equal(back.centers, sshape_model.centers)
        assert back.tau_nominal == sshape_model.tau_nominal
        a = dmp.rollout(back, 0.005).trajectory
        b = dmp.rollout(sshape_model, 0.005).trajectory
        np.testing.assert_array_equal(a.points, b.points)

    def test_field_layout(self, sshape_model, tmp_path):
        path = tmp_path / "model.json"
        dmp.save_model(sshape_model, path)
        doc = json.loads(path.read_text())
        assert set(doc) == {
            "d", "n_basis", "alpha", "tau_nominal", "x0", "g",
            "centers", "widths", "weights",
        }
        assert len(doc["weights"]) == sshape_model.d * sshape_model.n_basis

    def test_rejects_unknown_fields(self, sshape_model):
        doc = dmp.model_to_dict(sshape_model)
        doc["extra"] = 1
        with pytest.raises(InvalidInputError):
            dmp.model_from_dict(doc)
