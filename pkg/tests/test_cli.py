import json
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from safedmp import bench, cli, dmp, safe_exec

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "model.json"
    code = run_cli("learn", "--demo", "builtin:sshape", "--out", str(out))
    assert code == 0
    return out


class TestLearn:
    def test_builtin_minjerk_self_check(self, tmp_path, capsys):
        out = tmp_path / "model.json"
        code = run_cli("learn", "--demo", "builtin:minjerk", "--out", str(out))
        captured = capsys.readouterr()
        assert code == 0
        assert out.exists()
        # printed self-check stays under 1% of the bounding-box diagonal
        line = [l for l in captured.out.splitlines() if "MAE" in l][0]
        percent = float(line.split("(")[1].split("%")[0])
        assert percent < 1.0

    def test_two_sample_demo_rejected(self, tmp_path):
        demo = tmp_path / "tiny.csv"
        demo.write_text("t,x,y\n0,0,0\n1,1,1\n")
        code = run_cli("learn", "--demo", str(demo), "--out", str(tmp_path / "m.json"))
        assert code == cli.EXIT_INPUT

    def test_malformed_csv_rejected(self, tmp_path):
        demo = tmp_path / "bad.csv"
        demo.write_text("t,x,y\n0,zero,0\n1,1,1\n")
        code = run_cli("learn", "--demo", str(demo), "--out", str(tmp_path / "m.json"))
        assert code == cli.EXIT_INPUT

    def test_default_basis_count(self, tmp_path):
        out = tmp_path / "model.json"
        run_cli("learn", "--demo", "builtin:minjerk", "--out", str(out))
        doc = json.loads(out.read_text())
        assert doc["n_basis"] == 25

    def test_random_rotation_seeded(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        run_cli("learn", "--demo", "builtin:sshape", "--out", str(a),
                "--rotate-random", "--seed", "5")
        run_cli("learn", "--demo", "builtin:sshape", "--out", str(b),
                "--rotate-random", "--seed", "5")
        assert a.read_bytes() == b.read_bytes()


class TestRun:
    def test_obstacle_free(self, model_path, tmp_path):
        code = run_cli(
            "run", "--model", str(model_path),
            "--scenario", str(SCENARIO_DIR / "free_sshape.json"),
            "--out", str(tmp_path / "free"),
        )
        assert code == 0
        metrics = json.loads((tmp_path / "free_metrics.json").read_text())
        row = metrics["rows"][0]
        assert row["metrics"]["collision_count"] == 0
        assert row["metrics"]["converged"] is True
        assert row["metrics"]["exec_time_mean_s"] is None

    def test_static_scenario_clearance_column(self, model_path, tmp_path):
        code = run_cli(
            "run", "--model", str(model_path),
            "--scenario", str(SCENARIO_DIR / "static_one_sshape.json"),
            "--out", str(tmp_path / "static"),
        )
        assert code == 0
        rows = cli.read_log_csv(tmp_path / "static_log.csv")
        scenario = bench.load_scenario(SCENARIO_DIR / "static_one_sshape.json")
        r_o = scenario.obstacles[0].radius
        assert all(row["min_clearance"] >= r_o * 0.0 for row in rows)
        assert min(row["min_clearance"] for row in rows) >= 0.0

    def test_log_round_trip_exact(self, model_path, tmp_path):
        run_cli(
            "run", "--model", str(model_path),
            "--scenario", str(SCENARIO_DIR / "perturb_two_sshape.json"),
            "--out", str(tmp_path / "pert"),
        )
        rows = cli.read_log_csv(tmp_path / "pert_log.csv")
        model = dmp.load_model(model_path)
        scenario = bench.load_scenario(SCENARIO_DIR / "perturb_two_sshape.json")
        nominal = dmp.rollout(model, scenario.dt)
        prepared = bench.PreparedScenario(
            scenario=scenario, model=model, demo=nominal.trajectory,
            nominal=nominal.trajectory, nominal_converged=True,
        )
        log = bench.run_scenario(prepared)
        assert len(rows) == log.steps
        for row, record in zip(rows, log.records):
            assert row["t"] == record.t
            np.testing.assert_array_equal(row["x_measured"], record.x_measured)
            np.testing.assert_array_equal(row["x_desired"], record.x_desired)
            np.testing.assert_array_equal(row["x_nominal"], record.x_nominal)
            np.testing.assert_array_equal(row["x_safe"], record.x_safe)
            assert row["tau"] == record.tau
            assert row["z"] == record.z
            assert row["min_clearance"] == record.min_clearance

    def test_apf_headon_flags(self, tmp_path):
        model_out = tmp_path / "mj.json"
        run_cli("learn", "--demo", "builtin:minjerk", "--out", str(model_out))
        code = run_cli(
            "run", "--model", str(model_out),
            "--scenario", str(SCENARIO_DIR / "headon_symmetric_minjerk.json"),
            "--method", "dmp-apf",
            "--out", str(tmp_path / "headon"),
        )
        metrics = json.loads((tmp_path / "headon_metrics.json").read_text())
        row = metrics["rows"][0]["metrics"]
        if code == 0:
            assert row["oscillation_flag"] or row["collision_count"] > 0
        else:
            assert code == cli.EXIT_NONCONVERGED

    def test_exit_code_parse_error(self, model_path, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = run_cli(
            "run", "--model", str(model_path), "--scenario", str(bad),
            "--out", str(tmp_path / "x"),
        )
        assert code == cli.EXIT_INPUT

    def test_exit_code_safety_infeasible(self, tmp_path):
        model_out = tmp_path / "mj.json"
        run_cli("learn", "--demo", "builtin:minjerk", "--out", str(model_out))
        model = dmp.load_model(model_out)
        nominal = dmp.rollout(model, 0.005).trajectory
        mid = nominal.points[nominal.n // 2]
        tangent = nominal.points[nominal.n // 2 + 5] - nominal.points[nominal.n // 2 - 5]
        tangent /= np.linalg.norm(tangent)
        # a long chain of overlapping clearance spheres along the path:
        # the projection pass budget cannot walk a mid-chain target out
        scenario = bench.Scenario(
            name="jammed", demo_source="builtin:minjerk",
            obstacles=tuple(
                safe_exec.Obstacle(center0=mid + tangent * 0.02 * i, radius=0.06)
                for i in range(-5, 6)
            ),
        )
        spath = tmp_path / "jammed.json"
        bench.save_scenario(scenario, spath)
        code = run_cli(
            "run", "--model", str(model_out), "--scenario", str(spath),
            "--out", str(tmp_path / "jam"),
        )
        assert code == cli.EXIT_INFEASIBLE
        assert (tmp_path / "jam_log.csv").exists()  # partial log still written

    def test_exit_code_nonconvergence(self, tmp_path):
        model_out = tmp_path / "mj.json"
        run_cli("learn", "--demo", "builtin:minjerk", "--out", str(model_out))
        model = dmp.load_model(model_out)
        nominal = dmp.rollout(model, 0.005).trajectory
        scenario = bench.Scenario(
            name="blocked_goal", demo_source="builtin:minjerk",
            obstacles=(safe_exec.Obstacle(center0=nominal.points[-1], radius=0.05),),
        )
        spath = tmp_path / "blocked.json"
        bench.save_scenario(scenario, spath)
        code = run_cli(
            "run", "--model", str(model_out), "--scenario", str(spath),
            "--out", str(tmp_path / "blocked"),
        )
        assert code == cli.EXIT_NONCONVERGED

    def test_run_byte_determinism(self, model_path, tmp_path):
        for tag in ("a", "b"):
            code = run_cli(
                "run", "--model", str(model_path),
                "--scenario", str(SCENARIO_DIR / "moving_cross_sshape.json"),
                "--out", str(tmp_path / tag),
            )
            assert code == 0
        assert (tmp_path / "a_log.csv").read_bytes() == (tmp_path / "b_log.csv").read_bytes()
        assert (
            (tmp_path / "a_metrics.json").read_bytes()
            == (tmp_path / "b_metrics.json").read_bytes()
        )


class TestBench:
    def test_empty_directory(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        code = run_cli("bench", "--scenario-dir", str(empty),
                       "--out", str(tmp_path / "empty"))
        assert code == 0
        doc = json.loads((tmp_path / "empty_report.json").read_text())
        assert doc["rows"] == []

    def test_canned_suite_determinism(self, tmp_path):
        for tag in ("a", "b"):
            code = run_cli("bench", "--scenario-dir", str(SCENARIO_DIR),
                           "--out", str(tmp_path / tag))
            assert code == 0
        assert (
            (tmp_path / "a_report.json").read_bytes()
            == (tmp_path / "b_report.json").read_bytes()
        )
        doc = json.loads((tmp_path / "a_report.json").read_text())
        assert doc["schema_version"] == 1
        safedmp_rows = [r for r in doc["rows"] if r["method"] == "safedmp"]
        assert safedmp_rows and all(
            r["metrics"]["collision_count"] == 0 for r in safedmp_rows
        )

    def test_matches_committed_golden(self, tmp_path):
        golden = pathlib.Path(__file__).parent / "data" / "golden_report.json"
        code = run_cli("bench", "--scenario-dir", str(SCENARIO_DIR),
                       "--out", str(tmp_path / "g"))
        assert code == 0
        assert (tmp_path / "g_report.json").read_bytes() == golden.read_bytes()


def test_console_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "safedmp.cli", "learn",
         "--demo", "builtin:minjerk", "--out", str(tmp_path / "m.json")],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert (tmp_path / "m.json").exists()
