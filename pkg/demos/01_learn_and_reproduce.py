"""Learn a motion primitive from one demonstration and reproduce it.

Walks the full learning pipeline on the built-in handwriting-style stroke:
resample, smooth, lift to 3D, differentiate, fit 25 basis weights, then
roll the primitive out and measure how faithfully it replays the stroke.
Writes the preprocessed demonstration and the reproduction to CSV next to
this script (under demos/out/).
"""

import pathlib

import numpy as np

from safedmp import bench, dmp, trajectory

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def save_csv(name, traj):
    header = "t," + ",".join(f"x{i}" for i in range(traj.d))
    np.savetxt(
        OUT / name,
        np.column_stack([traj.times, traj.points]),
        delimiter=",", header=header, comments="",
    )


def main():
    raw = trajectory.load_demo("builtin:sshape")
    print(f"raw demonstration: {raw.n} samples, d={raw.d}, "
          f"duration {raw.duration:.2f} s")

    demo = trajectory.preprocess(raw)
    print(f"preprocessed: {demo.n} uniform samples, lifted to d={demo.d} "
          f"at z={demo.points[0, 2]:.2f} m, low-pass smoothed")

    model = dmp.learn_from_trajectory(demo, n_basis=25)
    print(f"learned primitive: {model.n_basis} basis functions per dimension, "
          f"alpha={model.alpha:g} (beta={model.beta:g}, "
          f"phase constant {model.alpha_z:.3f})")

    replay = dmp.rollout(model, 1e-3, horizon=model.tau_nominal,
                         stop_at_goal=False)
    err = bench.mae(replay.trajectory, demo)
    diag = demo.bounding_box_diagonal()
    print(f"reproduction error: {err:.5f} m "
          f"({100 * err / diag:.2f}% of the stroke's bounding-box diagonal)")

    # spatial retargeting: same shape, new endpoints, no re-learning
    moved = dmp.retarget(model, model.x0 + [0.1, -0.1, 0.0],
                         model.g + [0.3, 0.2, 0.0])
    moved_roll = dmp.rollout(moved, 0.005)
    print(f"retargeted rollout reaches the new goal within "
          f"{np.linalg.norm(moved_roll.trajectory.points[-1] - moved.g):.4f} m "
          f"(converged: {moved_roll.converged})")

    save_csv("demo_preprocessed.csv", demo)
    save_csv("demo_reproduction.csv", replay.trajectory)
    print(f"wrote {OUT / 'demo_preprocessed.csv'} and "
          f"{OUT / 'demo_reproduction.csv'}")


if __name__ == "__main__":
    main()
