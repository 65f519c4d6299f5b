import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from gridreg.pcio import write_xyz


def run_cli(*args, timeout=300):
    return subprocess.run(
        [sys.executable, "-m", "gridreg", *[str(a) for a in args]],
        capture_output=True, text=True, timeout=timeout,
    )


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({
        "shape": "blob",
        "points_pool": 96,
        "points_reference": 48,
        "points_source": 48,
        "rot_range_deg": 2.0,
        "trans_range": 0.03,
        "noise_sigma": 0.0,
        "noise_clip": 0.0,
        "keep_fraction": 1.0,
        "rng_seed": 0,
        "shared_base": False,
    }))
    return path


@pytest.fixture
def search_file(tmp_path):
    path = tmp_path / "search.json"
    path.write_text(json.dumps({
        "rot_range_deg": 2.0, "rot_step_deg": 1.0,
        "trans_range": 0.06, "trans_bin": 0.02,
        "q": 0.5, "metric": "trunc-l1",
    }))
    return path


@pytest.fixture
def cloud_file(tmp_path):
    rng = np.random.default_rng(0)
    pts = []
    while len(pts) < 12:
        p = rng.uniform(-1, 1, 3)
        if all(np.abs(p - q).max() > 0.4 for q in pts):
            pts.append(p)
    path = tmp_path / "cloud.xyz"
    write_xyz(path, np.array(pts))
    return path


class TestBasics:
    def test_help(self):
        proc = run_cli("--help")
        assert proc.returncode == 0
        for name in ("register", "benchmark", "generate", "oracle-check", "scaling"):
            assert name in proc.stdout

    def test_no_command_is_usage_error(self):
        proc = run_cli()
        assert proc.returncode == 2


class TestGenerate:
    def test_writes_instance_files(self, tmp_path, scenario_file):
        prefix = tmp_path / "inst"
        proc = run_cli("generate", "--scenario", scenario_file,
                       "--seed", 3, "--out-prefix", prefix)
        assert proc.returncode == 0, proc.stderr
        for suffix in ("_source.xyz", "_reference.xyz", "_gt.json"):
            assert (tmp_path / f"inst{suffix}").exists()
        side = json.loads((tmp_path / "inst_gt.json").read_text())
        assert side["config"]["rng_seed"] == 3
        assert np.array(side["gt_aligner"]["rotation"]).shape == (3, 3)

    def test_seed_changes_output(self, tmp_path, scenario_file):
        for seed in (1, 2):
            run_cli("generate", "--scenario", scenario_file, "--seed", seed,
                    "--out-prefix", tmp_path / f"s{seed}")
        a = (tmp_path / "s1_source.xyz").read_bytes()
        b = (tmp_path / "s2_source.xyz").read_bytes()
        assert a != b

    def test_missing_scenario_file(self, tmp_path):
        proc = run_cli("generate", "--scenario", tmp_path / "none.json",
                       "--out-prefix", tmp_path / "x")
        assert proc.returncode == 2
        assert "error:" in proc.stderr


class TestRegister:
    def test_self_registration_text_output(self, cloud_file):
        proc = run_cli("register", cloud_file, cloud_file,
                       "--rot-range", 5, "--rot-step", 5,
                       "--trans-range", 0.1, "--trans-bin", 0.1)
        assert proc.returncode == 0, proc.stderr
        assert "rotation (deg, xyz): +0.0000 +0.0000 +0.0000" in proc.stdout
        assert "inliers: 12 / 12" in proc.stdout

    def test_json_output(self, tmp_path, cloud_file):
        out = tmp_path / "moved.xyz"
        proc = run_cli("register", cloud_file, cloud_file,
                       "--rot-range", 5, "--rot-step", 5,
                       "--trans-range", 0.1, "--trans-bin", 0.1,
                       "--out", out, "--json")
        assert proc.returncode == 0, proc.stderr
        report = json.loads(proc.stdout)
        assert report["chamfer_after_m"] == 0.0
        assert report["engine"] == "dses"
        assert out.exists()

    def test_roundtrip_on_generated_instance(self, tmp_path, scenario_file):
        prefix = tmp_path / "fix"
        assert run_cli("generate", "--scenario", scenario_file, "--seed", 5,
                       "--out-prefix", prefix).returncode == 0
        proc = run_cli("register", f"{prefix}_source.xyz", f"{prefix}_reference.xyz",
                       "--rot-range", 3, "--rot-step", 1,
                       "--trans-range", 0.06, "--trans-bin", 0.02, "--json")
        assert proc.returncode == 0, proc.stderr
        report = json.loads(proc.stdout)
        side = json.loads((tmp_path / "fix_gt.json").read_text())
        # noiseless fixture: the recovered pose should be the planted one
        # up to a couple of grid cells
        gt = np.array(side["gt_aligner"]["translation"])
        assert np.abs(np.array(report["translation_m"]) - gt).max() <= 0.04

    def test_center_pose(self, tmp_path, cloud_file):
        pose = tmp_path / "pose.json"
        pose.write_text(json.dumps({"euler_deg": [0.0, 0.0, 0.0],
                                    "translation": [0.0, 0.0, 0.0]}))
        proc = run_cli("register", cloud_file, cloud_file,
                       "--rot-range", 2, "--rot-step", 2,
                       "--trans-range", 0.05, "--trans-bin", 0.05,
                       "--center-pose", pose, "--json")
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout)["best_inliers"] == 12

    def test_exhaustive_flag(self, cloud_file):
        proc = run_cli("register", cloud_file, cloud_file,
                       "--rot-range", 2, "--rot-step", 2,
                       "--trans-range", 0.05, "--trans-bin", 0.05,
                       "--exhaustive", "--json")
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout)["engine"] == "exhaustive"

    def test_missing_file_exits_2(self, tmp_path):
        proc = run_cli("register", tmp_path / "a.xyz", tmp_path / "b.xyz")
        assert proc.returncode == 2
        assert "error:" in proc.stderr
        assert not (tmp_path / "a.xyz").exists()

    def test_search_space_cap_exits_1(self, cloud_file):
        proc = run_cli("register", cloud_file, cloud_file,
                       "--rot-range", 45, "--rot-step", 0.01)
        assert proc.returncode == 1
        assert "error:" in proc.stderr

    def test_malformed_cloud_exits_2(self, tmp_path):
        bad = tmp_path / "bad.xyz"
        bad.write_text("1 2\n")
        proc = run_cli("register", bad, bad)
        assert proc.returncode == 2


class TestBenchmark:
    def test_csv_and_stdout(self, tmp_path, scenario_file, search_file):
        csv_path = tmp_path / "batch.csv"
        proc = run_cli("benchmark", "--scenario", scenario_file,
                       "--search", search_file, "--trials", 2, "--seed", 0,
                       "--csv", csv_path)
        assert proc.returncode == 0, proc.stderr
        assert "recall:" in proc.stdout
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "# gridreg-batch-csv v1"
        assert len(lines) == 4

    def test_csv_reruns_are_byte_identical(self, tmp_path, scenario_file, search_file):
        outs = []
        for name in ("one.csv", "two.csv"):
            path = tmp_path / name
            proc = run_cli("benchmark", "--scenario", scenario_file,
                           "--search", search_file, "--trials", 2, "--seed", 9,
                           "--csv", path)
            assert proc.returncode == 0, proc.stderr
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_json_report_written(self, tmp_path, scenario_file, search_file):
        json_path = tmp_path / "batch.json"
        proc = run_cli("benchmark", "--scenario", scenario_file,
                       "--search", search_file, "--trials", 1,
                       "--json", json_path)
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(json_path.read_text())
        assert payload["schema"] == "gridreg-batch-json v1"
        assert len(payload["records"]) == 1

    def test_malformed_json_exits_2(self, tmp_path, search_file):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        proc = run_cli("benchmark", "--scenario", bad, "--search", search_file)
        assert proc.returncode == 2

    def test_unknown_scenario_key_exits_2(self, tmp_path, search_file):
        bad = tmp_path / "extra.json"
        bad.write_text(json.dumps({"shape": "blob", "points": 64}))
        proc = run_cli("benchmark", "--scenario", bad, "--search", search_file)
        assert proc.returncode == 2
        assert "unknown scenario keys" in proc.stderr


class TestOracleCheckAndScaling:
    def test_oracle_check_passes(self):
        proc = run_cli("oracle-check", "--trials", 3, "--seed", 0)
        assert proc.returncode == 0, proc.stderr
        assert "3/3 ok" in proc.stdout

    def test_scaling_csv(self, tmp_path, scenario_file, search_file):
        csv_path = tmp_path / "scaling.csv"
        proc = run_cli("scaling", "--scenario", scenario_file,
                       "--search", search_file, "--rot-ranges", 1, 2,
                       "--reps", 1, "--csv", csv_path)
        assert proc.returncode == 0, proc.stderr
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "# gridreg-scaling-csv v1"
        assert len(lines) == 4

    def test_scaling_without_ranges_exits_2(self, scenario_file):
        proc = run_cli("scaling", "--scenario", scenario_file)
        assert proc.returncode == 2

    def test_threads_flag(self, scenario_file, search_file):
        proc = run_cli("--threads", 1, "benchmark", "--scenario", scenario_file,
                       "--search", search_file, "--trials", 1)
        assert proc.returncode == 0, proc.stderr


@pytest.mark.skipif(shutil.which("gridreg") is None,
                    reason="console script not on PATH")
def test_console_script_help():
    proc = subprocess.run(["gridreg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "register" in proc.stdout
