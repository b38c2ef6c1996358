import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pkmdyn.cli import InputError, TrajectorySpec, bench, main, sample_times
from pkmdyn.model import bundled_model_path


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture(scope="module")
def gsp_roll_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("run") / "roll.csv"
    assert main(["run", "--model", "gsp", "--traj", "roll", "--rate", "1000", "--out", str(path)]) == 0
    return path


def test_roll_run_rows_and_periodicity(gsp_roll_csv):
    header, data = read_csv(gsp_roll_csv)
    assert data.shape[0] == 1001
    assert header[0] == "t" and "u0_d2" in header and "tau5" in header and "theta_a0_d4" in header
    assert np.all(np.isfinite(data))
    assert data[0, 0] == 0.0 and data[-1, 0] == 1.0
    cols = [i for i, h in enumerate(header) if h.startswith("u")]
    assert np.max(np.abs(data[0, cols] - data[-1, cols])) <= 1e-9 * (1 + np.max(np.abs(data[:, cols])))


def test_roll_run_is_deterministic(gsp_roll_csv, tmp_path):
    again = tmp_path / "again.csv"
    assert main(["run", "--model", "gsp", "--traj", "roll", "--rate", "1000", "--out", str(again)]) == 0
    assert again.read_bytes() == gsp_roll_csv.read_bytes()


def test_csv_round_trips_floats(gsp_roll_csv):
    text = gsp_roll_csv.read_text().splitlines()[500].split(",")
    for s in text:
        assert format(float(s), ".17g") == s


def test_planar_p2p_has_torques(tmp_path):
    out = tmp_path / "p2p.csv"
    model = str(bundled_model_path("planar_3rrr"))
    code = main(["run", "--model", model, "--traj", "p2p", "--delta", "0.04", "0.03", "0", "--rate", "200", "--out", str(out)])
    assert code == 0
    header, data = read_csv(out)
    assert [h for h in header if h.startswith("tau")] == ["tau0", "tau1", "tau2"]
    assert data.shape[0] == 201
    tau = data[:, [header.index(h) for h in ("tau0", "tau1", "tau2")]]
    assert np.all(np.isfinite(tau))


def test_spec_file_and_flag_override(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "roll", "theta_min": -0.2, "theta_max": 0.2, "period": 2.0}))
    out = tmp_path / "a.csv"
    assert main(["run", "--model", "gsp", "--spec", str(spec), "--rate", "10", "--out", str(out)]) == 0
    _, data = read_csv(out)
    assert data.shape[0] == 21 and data[-1, 0] == 2.0
    assert main(["run", "--model", "gsp", "--spec", str(spec), "--period", "1", "--rate", "10", "--out", str(out)]) == 0
    assert read_csv(out)[1].shape[0] == 11


def test_bench_single_call(tmp_path):
    out = tmp_path / "bench.txt"
    assert main(["bench", "--model", "planar_3rrr", "--traj", "p2p", "--calls", "1", "--out", str(out)]) == 0
    result = dict(line.split(",") for line in out.read_text().splitlines())
    assert result["calls"] == "1"
    assert float(result["mean_us"]) == float(result["min_us"]) > 0.0
    assert float(result["task_jacobian_lu_per_call"]) == 3.0
    assert float(result["ik_jacobian_lu_per_call"]) == 1.0


def test_bench_repeatable(gsp):
    runs = [bench(gsp, TrajectorySpec(), 2000)["median_us"] for _ in range(3)]
    assert max(runs) <= 1.2 * min(runs)


def test_verify_exit_codes(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["verify", "--model", "planar_3rrr", "--traj", "p2p", "--samples", "3", "--out", str(out)]) == 0
    assert out.read_text().startswith("quantity,order,max_rel_error,tolerance,pass\n")
    assert main(["verify", "--model", "planar_3rrr", "--traj", "p2p", "--samples", "3", "--lemma", "printed", "--out", str(out)]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--model", "nonexistent"],
        ["run", "--model", "gsp", "--theta-min", "1", "--theta-max", "0"],
        ["run", "--model", "gsp", "--period", "0"],
        ["run", "--model", "gsp", "--traj", "zigzag"],
        ["run", "--model", "planar_3rrr", "--traj", "roll", "--axis", "rx"],
        ["run", "--model", "gsp", "--spec", "/nonexistent/spec.json"],
        ["bench", "--model", "gsp", "--calls", "0"],
        ["verify", "--model", "gsp", "--tolerance-scale", "-1"],
        ["frobnicate"],
    ],
)
def test_input_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_sample_times():
    t = sample_times(0.0, 1.0, 1000)
    assert len(t) == 1001 and t[-1] == 1.0
    with pytest.raises(InputError):
        sample_times(1.0, 0.0, 10)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pkmdyn", "bench", "--model", "planar_3rrr", "--traj", "p2p", "--calls", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("calls,2\n")
