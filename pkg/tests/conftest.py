import numpy as np
import pytest

from safedmp import bench, dmp, trajectory


@pytest.fixture(scope="session")
def sshape_demo():
    return trajectory.preprocess(trajectory.load_demo("builtin:sshape"))


@pytest.fixture(scope="session")
def sshape_model(sshape_demo):
    return dmp.learn_from_trajectory(sshape_demo)


@pytest.fixture(scope="session")
def sshape_nominal(sshape_model):
    return dmp.rollout(sshape_model, 0.005)


@pytest.fixture(scope="session")
def minjerk_demo():
    return trajectory.preprocess(trajectory.load_demo("builtin:minjerk"))


@pytest.fixture(scope="session")
def minjerk_model(minjerk_demo):
    return dmp.learn_from_trajectory(minjerk_demo)


@pytest.fixture(scope="session")
def straight_line_model():
    """Zero-forcing primitive along x at z-height 0.25 (head-on test bed)."""
    centers, widths = dmp.default_basis(25, 25.0 / 6.0)
    return dmp.DmpModel(
        d=3,
        n_basis=25,
        alpha=25.0,
        tau_nominal=2.0,
        x0=np.array([0.0, 0.0, 0.25]),
        g=np.array([0.6, 0.0, 0.25]),
        centers=centers,
        widths=widths,
        weights=np.zeros((3, 25)),
    )


@pytest.fixture(scope="session")
def standard_impulses(sshape_nominal):
    return bench.standard_perturbations(sshape_nominal.trajectory.duration)
