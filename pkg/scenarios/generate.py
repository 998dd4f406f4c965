"""Regenerate the canned scenario suite.

Obstacle geometry is derived from the learned nominal paths so every file
stays feasible (disjoint clearance spheres, endpoints clear).  Run from the
repository root:  python3 scenarios/generate.py
"""

import pathlib

import numpy as np

from safedmp import bench, dmp, safe_exec, trajectory

OUT = pathlib.Path(__file__).parent


def nominal_for(source):
    demo = trajectory.preprocess(trajectory.load_demo(source))
    model = dmp.learn_from_trajectory(demo)
    return model, dmp.rollout(model, 0.005).trajectory


def arc_point(nominal, frac):
    seg = np.linalg.norm(np.diff(nominal.points, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    idx = int(np.searchsorted(arc, frac * arc[-1]))
    return nominal.points[min(idx, nominal.n - 1)], nominal.times[min(idx, nominal.n - 1)]


def save(name, scenario):
    bench.save_scenario(scenario, OUT / f"{name}.json")
    print("wrote", name)


def main():
    _, sshape = nominal_for("builtin:sshape")
    _, minjerk = nominal_for("builtin:minjerk")

    for source in ("minjerk", "sine2", "sshape"):
        save(f"free_{source}", bench.Scenario(
            name=f"free_{source}", demo_source=f"builtin:{source}"))

    rng = np.random.default_rng(0)
    blocker = bench.random_static_blocker(sshape, rng)
    save("static_one_sshape", bench.Scenario(
        name="static_one_sshape", demo_source="builtin:sshape",
        obstacles=(blocker,)))

    rng = np.random.default_rng(1)
    first = bench.random_static_blocker(minjerk, rng, fraction_range=(0.25, 0.45))
    second = bench.random_static_blocker(
        minjerk, rng, fraction_range=(0.6, 0.8), existing=[first])
    save("static_two_minjerk", bench.Scenario(
        name="static_two_minjerk", demo_source="builtin:minjerk",
        obstacles=(first, second)))

    rng = np.random.default_rng(2)
    crossing = bench.random_crossing_obstacle(sshape, rng)
    save("moving_cross_sshape", bench.Scenario(
        name="moving_cross_sshape", demo_source="builtin:sshape",
        obstacles=(crossing,)))

    p_mid, t_mid = arc_point(sshape, 0.5)
    windowed = safe_exec.Obstacle(
        center0=p_mid + np.array([0.0, 0.03, 0.0]), radius=0.03,
        velocity=np.array([0.0, -0.05, 0.0]),
        active_window=(max(0.0, t_mid - 0.6), t_mid + 0.8),
    )
    save("windowed_moving_sshape", bench.Scenario(
        name="windowed_moving_sshape", demo_source="builtin:sshape",
        obstacles=(windowed,)))

    for source, nominal in (("sshape", sshape), ("minjerk", minjerk)):
        perts = bench.standard_perturbations(nominal.duration)
        save(f"perturb_two_{source}", bench.Scenario(
            name=f"perturb_two_{source}", demo_source=f"builtin:{source}",
            perturbations=perts))

    head_on, _ = arc_point(minjerk, 0.5)
    save("headon_symmetric_minjerk", bench.Scenario(
        name="headon_symmetric_minjerk", demo_source="builtin:minjerk",
        obstacles=(safe_exec.Obstacle(center0=head_on, radius=0.05),)))


if __name__ == "__main__":
    main()
