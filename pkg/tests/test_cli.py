import json
import subprocess
import sys

import numpy as np
import pytest

from ifind_sim.chain import bundled_config_path
from ifind_sim.cli import main
from ifind_sim.dualarm import assemble_rig, load_trajectory, min_separation
from ifind_sim.session import (SessionEvent, SessionLog, append_event,
                               save_session)


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestFk:
    def test_home_pose(self, capsys):
        code, out, _ = run_cli(["fk", "--preset", "ifind-v2", "--q",
                                "0,0,0,0,0,0,0,0"], capsys)
        assert code == 0
        assert out.startswith("position: 0.028778233")

    def test_records_format(self, capsys):
        code, out, _ = run_cli(["fk", "--preset", "ifind-v2", "--q",
                                "0,0,0,0,0,0,0,0", "--format", "records"],
                               capsys)
        assert code == 0
        record = json.loads(out)
        assert record["position"][2] == pytest.approx(0.21747377449297928)

    def test_unknown_preset_exit_two(self, capsys):
        code, _, err = run_cli(["fk", "--preset", "ifind-v9", "--q", "0"],
                               capsys)
        assert code == 2
        assert "unknown preset" in err

    def test_wrong_vector_length_exit_two(self, capsys):
        code, _, err = run_cli(["fk", "--preset", "ifind-v2", "--q",
                                "not,numbers"], capsys)
        assert code == 2
        assert "bad numeric vector" in err

    def test_missing_flag_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["fk", "--q", "0,0"])
        assert info.value.code == 2


class TestIk:
    def test_round_trip_through_fk(self, capsys):
        code, out, _ = run_cli(["fk", "--preset", "ifind-v2", "--q",
                                "0.2,0.3,-0.2,0.5,0.4,0,0,0.3",
                                "--format", "records"], capsys)
        target = json.loads(out)
        code, out, _ = run_cli(
            ["ik", "--preset", "ifind-v2",
             "--position", ",".join(str(v) for v in target["position"]),
             "--quaternion", ",".join(str(v) for v in target["quaternion"]),
             "--format", "records"], capsys)
        assert code == 0
        q = json.loads(out)["q"]
        code, out, _ = run_cli(["fk", "--preset", "ifind-v2", "--q",
                                ",".join(str(v) for v in q),
                                "--format", "records"], capsys)
        reached = json.loads(out)
        assert np.allclose(reached["position"], target["position"],
                           atol=1e-6)

    def test_unreachable_exit_one(self, capsys):
        code, _, err = run_cli(
            ["ik", "--preset", "ifind-v1", "--position", "9,9,9",
             "--quaternion", "0,0,1,0"], capsys)
        assert code == 1
        assert "no IK solution" in err


class TestPlan:
    # Values starting with a dash must use the --flag=value form.
    LANES = ["--left-start=-0.05,-0.10,0.105", "--left-end=-0.05,0.10,0.105",
             "--right-start=0.05,-0.10,0.105", "--right-end=0.05,0.10,0.105"]

    def test_parallel_lanes_full_trajectory(self, capsys, tmp_path):
        out_path = tmp_path / "traj.jsonl"
        code, out, _ = run_cli(
            ["plan", "--mesh", "phantom-abdomen", *self.LANES,
             "--count", "10", "--margin", "0.02", "--out", str(out_path),
             "--format", "records"], capsys)
        assert code == 0
        assert json.loads(out)["waypoints"] == 10
        trajectory = load_trajectory(out_path)
        rig = assemble_rig("ifind-v3")
        for point in trajectory:
            assert min_separation(rig, point.q17).min_distance >= 0.02

    def test_crossing_lanes_exit_one_with_index(self, capsys, tmp_path):
        code, _, err = run_cli(
            ["plan", "--mesh", "phantom-abdomen",
             "--left-start=-0.05,-0.08,0.06", "--left-end=0.05,0.08,0.06",
             "--right-start=0.05,-0.08,0.06", "--right-end=-0.05,0.08,0.06",
             "--count", "9", "--margin", "0.02"], capsys)
        assert code == 1
        assert "failed at waypoint" in err

    def test_missing_mesh_exit_two(self, capsys):
        code, _, err = run_cli(
            ["plan", "--mesh", "/nonexistent/mesh.off", *self.LANES],
            capsys)
        assert code == 2


class TestRunAndReport:
    def test_run_twice_identical_logs(self, capsys, tmp_path):
        scenario = bundled_config_path("scenarios", "v2-surface-follow.yaml")
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert run_cli(["run", "--scenario", str(scenario), "--out",
                        str(a)], capsys)[0] == 0
        assert run_cli(["run", "--scenario", str(scenario), "--out",
                        str(b)], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_report_prints_study_percentages(self, capsys, tmp_path):
        log = SessionLog()
        data = (("sonographer", "good", 114), ("sonographer", "acceptable",
                                               44),
                ("sonographer", "poor", 4), ("robot", "good", 31),
                ("robot", "acceptable", 42), ("robot", "poor", 17))
        for operator, grade, count in data:
            for _ in range(count):
                append_event(log, SessionEvent(0, "grade", {
                    "view": "pancreas TS", "operator": operator,
                    "grade": grade, "position_error": 0.0,
                    "orientation_error": 0.0, "normal_force": 5.0}))
        path = tmp_path / "grades.jsonl"
        save_session(log, path)
        code, out, _ = run_cli(["report", "--log", str(path)], capsys)
        assert code == 0
        assert "97.5%" in out
        assert "81.1%" in out
        assert "p < 0.001" in out

    def test_report_empty_log(self, capsys, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        code, out, _ = run_cli(["report", "--log", str(path)], capsys)
        assert code == 0
        assert "n=0" in out

    def test_report_missing_file_exit_two(self, capsys, tmp_path):
        code, _, _ = run_cli(["report", "--log",
                              str(tmp_path / "nope.jsonl")], capsys)
        assert code == 2

    def test_report_records_format(self, capsys, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        code, out, _ = run_cli(["report", "--log", str(path), "--format",
                                "records"], capsys)
        assert code == 0
        assert json.loads(out)["grades"]["robot"]["count"] == 0


class TestServeSubprocess:
    def test_serve_runs_and_shuts_down(self, tmp_path):
        import socket
        port = 19777
        log_out = tmp_path / "served.jsonl"
        proc = subprocess.Popen(
            [sys.executable, "-m", "ifind_sim.cli", "serve", "--preset",
             "ifind-v2", "--port", str(port), "--max-ticks", "100000",
             "--log-out", str(log_out)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        try:
            deadline = 30.0
            import time
            start = time.time()
            sock = None
            while time.time() - start < deadline:
                try:
                    sock = socket.create_connection(("127.0.0.1", port),
                                                    timeout=1.0)
                    break
                except OSError:
                    time.sleep(0.2)
            assert sock is not None, "service never came up"
            f = sock.makefile("rw")
            hello = json.loads(f.readline())
            assert hello["type"] == "hello"
            sock.sendall(b'{"request_id": "x", "kind": "shutdown"}\n')
            proc.wait(timeout=15)
            assert log_out.exists()
        finally:
            if proc.poll() is None:
                proc.kill()
