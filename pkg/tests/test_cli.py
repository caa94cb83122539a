import json
import subprocess
import sys

import numpy as np
import pytest

import smoothmatch as sm
from smoothmatch.cli import main
from smoothmatch.io import read_observations_csv, write_observations_csv


LV_CONFIG = {
    "system": "lotka-volterra",
    "theta_true": [0.5, 0.5, 0.5, 0.5],
    "xi": [1.0, 0.5],
    "window": [0.0, 25.0],
    "n": 50,
    "sigma": 0.1,
    "seed": 7,
    "bandwidth": 1.2,
}


def write_config(tmp_path, **overrides):
    cfg = dict(LV_CONFIG)
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def simulate(tmp_path, **overrides):
    cfg_path = write_config(tmp_path, out=str(tmp_path), **overrides)
    code = main(["simulate", "--config", cfg_path])
    assert code == 0
    return cfg_path, tmp_path / "observations.csv"


class TestSimulate:
    def test_paper_config_writes_csv(self, tmp_path, capsys):
        _, data = simulate(tmp_path)
        lines = data.read_text().splitlines()
        assert lines[0] == "t,y1,y2"
        assert len(lines) == 51
        assert "simulated n=50 d=2" in capsys.readouterr().out

    def test_same_seed_byte_identical(self, tmp_path):
        _, data = simulate(tmp_path)
        first = data.read_bytes()
        _, data = simulate(tmp_path)
        assert data.read_bytes() == first

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg_path, data = simulate(tmp_path)
        first = data.read_bytes()
        assert main(["simulate", "--config", cfg_path, "--seed", "8"]) == 0
        assert data.read_bytes() != first

    def test_zero_noise_equals_integrator_output(self, tmp_path):
        _, data = simulate(tmp_path, sigma=0.0)
        obs = read_observations_csv(data, t_origin=0.0)
        states = sm.states_at_times(
            sm.lotka_volterra(), [0.5] * 4, [1.0, 0.5], 0.0, obs.times
        )
        assert np.array_equal(obs.y, states)

    def test_missing_theta_is_config_error(self, tmp_path):
        cfg_path = write_config(tmp_path, theta_true=None, out=str(tmp_path))
        assert main(["simulate", "--config", cfg_path]) == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(dict(LV_CONFIG, bandwidht=1.0)))
        assert main(["simulate", "--config", str(path)]) == 2

    def test_divergence_exits_3(self, tmp_path):
        blow = {
            "name": "quadratic-growth",
            "dim_state": 1,
            "dim_param": 1,
            "matrix": [["x1**2"]],
            "offset": ["0"],
            "param_box": [[0.5, 2.0]],
        }
        sys_path = tmp_path / "blow.json"
        sys_path.write_text(json.dumps(blow))
        cfg_path = write_config(
            tmp_path,
            system=str(sys_path),
            theta_true=[2.0],
            xi=[1.0],
            window=[0.0, 2.0],
            n=20,
            sigma=0.0,
            out=str(tmp_path),
        )
        assert main(["simulate", "--config", cfg_path]) == 3


class TestEstimate:
    def test_round_trip(self, tmp_path, capsys):
        cfg_path, data = simulate(tmp_path)
        code = main(["estimate", "--config", cfg_path, str(data)])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["method"] == "linear-ls"
        assert len(report["theta_hat"]) == 4
        assert max(abs(v - 0.5) for v in report["theta_hat"]) <= 0.2
        assert set(report) >= {
            "theta_hat", "criterion", "method", "wall_time_s",
            "bandwidth", "iterations", "warnings",
        }
        grid_lines = (tmp_path / "grid.csv").read_text().splitlines()
        assert grid_lines[0] == "s,xhat1,xhat2,xhatp1,xhatp2"
        assert len(grid_lines) == 251

    def test_csv_round_trip_is_value_exact(self, tmp_path):
        _, data = simulate(tmp_path)
        obs = read_observations_csv(data, t_origin=0.0)
        copy = tmp_path / "copy.csv"
        write_observations_csv(copy, obs)
        assert copy.read_bytes() == data.read_bytes()

    def test_all_zero_data_exits_4(self, tmp_path):
        cfg_path = write_config(tmp_path, out=str(tmp_path))
        data = tmp_path / "zeros.csv"
        rows = ["t,y1,y2"] + [f"{0.5 * i},0,0" for i in range(1, 51)]
        data.write_text("\n".join(rows) + "\n")
        assert main(["estimate", "--config", cfg_path, str(data)]) == 4

    def test_malformed_csv_exits_2_with_location(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, out=str(tmp_path))
        data = tmp_path / "bad.csv"
        data.write_text("t,y1,y2\n0.5,1.0,0.4\n1.0,oops,0.5\n")
        assert main(["estimate", "--config", cfg_path, str(data)]) == 2
        err = capsys.readouterr().err
        assert "line 3" in err and "column 2" in err

    def test_missing_data_file_exits_2(self, tmp_path):
        cfg_path = write_config(tmp_path, out=str(tmp_path))
        assert main(["estimate", "--config", cfg_path, str(tmp_path / "nope.csv")]) == 2

    def test_nonnumeric_bandwidth_exits_2(self, tmp_path):
        cfg_path, data = simulate(tmp_path)
        cfg = json.loads((tmp_path / "config.json").read_text())
        cfg["bandwidth"] = "sweep"
        (tmp_path / "config.json").write_text(json.dumps(cfg))
        assert main(["estimate", "--config", cfg_path, str(data)]) == 2

    def test_estimation_failure_exits_5(self, tmp_path):
        # log(-1 - x1^2) is NaN everywhere, so the normal equations are non-finite
        nan_sys = {
            "name": "nan-system",
            "dim_state": 1,
            "dim_param": 1,
            "matrix": [["log(-1 - x1**2)"]],
            "offset": ["0"],
            "param_box": [[0.1, 2.0]],
        }
        sys_path = tmp_path / "nan.json"
        sys_path.write_text(json.dumps(nan_sys))
        cfg_path = write_config(
            tmp_path,
            system="exponential",
            theta_true=[0.5],
            xi=[1.0],
            window=[0.0, 1.0],
            n=30,
            sigma=0.01,
            bandwidth=0.2,
            out=str(tmp_path),
        )
        code = main(["simulate", "--config", cfg_path])
        assert code == 0
        cfg2 = json.loads((tmp_path / "config.json").read_text())
        cfg2["system"] = str(sys_path)
        (tmp_path / "config.json").write_text(json.dumps(cfg2))
        with np.errstate(invalid="ignore"):
            code = main(
                ["estimate", "--config", cfg_path, str(tmp_path / "observations.csv")]
            )
        assert code == 5

    def test_van_der_pol_golden_section(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            system="van-der-pol",
            theta_true=[0.8],
            xi=[1.0, 1.0],
            bandwidth=1.0,
            out=str(tmp_path),
        )
        assert main(["simulate", "--config", cfg_path]) == 0
        assert main(
            ["estimate", "--config", cfg_path, str(tmp_path / "observations.csv")]
        ) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["method"] == "golden-section"
        assert abs(report["theta_hat"][0] - 0.8) <= 0.15


class TestCompareOls:
    def test_exponential_comparison(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            system="exponential",
            theta_true=[1.0],
            xi=[1.0],
            window=[0.0, 1.0],
            n=40,
            sigma=0.05,
            bandwidth=0.2,
            weight_margin=1.3,
            out=str(tmp_path),
        )
        assert main(["simulate", "--config", cfg_path]) == 0
        code = main(
            ["compare-ols", "--config", cfg_path, str(tmp_path / "observations.csv")]
        )
        assert code == 0
        cmp = json.loads((tmp_path / "comparison.json").read_text())
        assert "theta_hat" in cmp["sme"] and "theta_hat" in cmp["ols"]
        assert cmp["wall_time_ratio"] > 1.0
        assert abs(cmp["sme"]["theta_hat"][0] - 1.0) <= 0.3
        assert abs(cmp["ols"]["theta_hat"][0] - 1.0) <= 0.3


class TestSweep:
    def test_singleton_candidate(self, tmp_path):
        cfg_path, data = simulate(tmp_path)
        code = main(
            ["sweep", "--config", cfg_path, str(data), "--candidates", "1.2"]
        )
        assert code == 0
        sweep = json.loads((tmp_path / "sweep.json").read_text())
        assert sweep["b_hat"] == 1.2
        assert len(sweep["table"]) == 1
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "bandwidth,rss,theta1,theta2,theta3,theta4"
        assert len(lines) == 2

    def test_multi_candidate_table(self, tmp_path):
        cfg_path, data = simulate(tmp_path)
        code = main(
            ["sweep", "--config", cfg_path, str(data), "--candidates", "0.9,1.2,1.8"]
        )
        assert code == 0
        sweep = json.loads((tmp_path / "sweep.json").read_text())
        rss = [row["rss"] for row in sweep["table"]]
        best = sweep["table"][int(np.argmin(rss))]["bandwidth"]
        assert sweep["b_hat"] == best


class TestMonteCarloCommands:
    def test_mc_rootn_smoke(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            system="exponential",
            theta_true=[0.5],
            xi=[1.0],
            window=[0.0, 1.0],
            n_values=[50, 100],
            replications=5,
            sigma=0.05,
            raw_csv=True,
            out=str(tmp_path),
        )
        assert main(["mc-rootn", "--config", cfg_path]) == 0
        report = json.loads((tmp_path / "mc_rootn.json").read_text())
        assert report["n_values"] == [50, 100]
        assert report["failures"] == 0
        raw = (tmp_path / "mc_rootn_raw.csv").read_text().splitlines()
        assert raw[0] == "n,rep,component,theta_hat"
        assert len(raw) == 1 + 2 * 5

    def test_mc_supnorm_smoke(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            n_values=[100, 200],
            replications=3,
            sigma=0.1,
            out=str(tmp_path),
        )
        assert main(["mc-supnorm", "--config", cfg_path]) == 0
        report = json.loads((tmp_path / "mc_supnorm.json").read_text())
        assert len(report["mean_sup_x"]) == 2
        assert report["family"] == "gaussian"


def test_kernel_info(capsys):
    assert main(["kernel-info"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["gegenbauer4"]["order"] == 4
    assert abs(out["gegenbauer4"]["mass"] - 1.0) <= 1e-9


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "smoothmatch.cli", "kernel-info"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "gegenbauer4" in proc.stdout
