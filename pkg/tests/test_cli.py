import json
import math

import numpy as np
import pytest

from chaos_mm.cli import main


def model_block(epsilon=0.01, x_0=3.0, k_v=0.1):
    return {"kind": "static_risk", "m_x": 1.0, "m_v": 1.0, "k_x": 0.11,
            "x_0": x_0, "epsilon": epsilon,
            "inventory_potential": {"kind": "quadratic", "k_v": k_v}}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


@pytest.fixture
def simulate_config(tmp_path):
    return write_config(tmp_path, {
        "model": model_block(),
        "integrator": {"scheme": "yoshida4", "dt": 0.01, "n_steps": 2000,
                       "record_every": 10},
        "experiment": {"kind": "simulate", "energy_target": 1.0,
                       "master_seed": 7},
        "output": {"directory": str(tmp_path / "out")},
    })


class TestValidation:
    def test_zero_steps_rejected_naming_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "model": model_block(),
            "integrator": {"dt": 0.01, "n_steps": 0},
            "experiment": {"kind": "simulate", "energy_target": 1.0},
        })
        assert main(["simulate", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "integrator.n_steps" in err

    def test_missing_block(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"model": model_block(),
                                      "integrator": {"dt": 0.01, "n_steps": 10}})
        assert main(["simulate", "--config", cfg]) == 2
        assert "experiment" in capsys.readouterr().err

    def test_wrong_experiment_kind_for_command(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "model": model_block(),
            "integrator": {"dt": 0.01, "n_steps": 10},
            "experiment": {"kind": "poincare", "energy_targets": [1.0]},
        })
        assert main(["simulate", "--config", cfg]) == 2
        assert "experiment.kind" in capsys.readouterr().err

    def test_bad_model_field(self, tmp_path, capsys):
        bad = model_block()
        bad["m_x"] = -1.0
        cfg = write_config(tmp_path, {
            "model": bad,
            "integrator": {"dt": 0.01, "n_steps": 10},
            "experiment": {"kind": "simulate", "energy_target": 1.0},
        })
        assert main(["simulate", "--config", cfg]) == 2
        assert "model.m_x" in capsys.readouterr().err

    def test_unreadable_config(self, capsys):
        assert main(["simulate", "--config", "/nonexistent.json"]) == 2
        assert "config" in capsys.readouterr().err


class TestSimulate:
    def test_csv_columns_and_rows(self, tmp_path, simulate_config):
        assert main(["simulate", "--config", simulate_config]) == 0
        header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        assert header == ["step", "t", "x", "v", "p_x", "p_v", "energy"]
        assert len(rows) == 201
        assert rows[0][0] == "0"
        assert rows[-1][0] == "2000"
        # recorded energy stays near the sampled target
        assert abs(float(rows[0][6]) - 1.0) <= 0.01

    def test_metadata_contents(self, tmp_path, simulate_config):
        main(["simulate", "--config", simulate_config])
        meta = json.loads((tmp_path / "out" / "simulate_metadata.json").read_text())
        assert meta["command"] == "simulate"
        assert meta["master_seed"] == 7
        assert meta["version"]
        assert meta["status"]["kind"] == "completed"
        assert meta["config"]["model"]["k_x"] == 0.11
        assert meta["config"]["integrator"]["n_steps"] == 2000

    def test_byte_identical_reruns(self, tmp_path, simulate_config):
        main(["simulate", "--config", simulate_config, "--out", str(tmp_path / "a")])
        main(["simulate", "--config", simulate_config, "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "trajectory.csv").read_bytes()
        b = (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert a == b

    def test_explicit_ic(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(),
            "integrator": {"dt": 0.01, "n_steps": 100},
            "experiment": {"kind": "simulate", "ic": [4.0, 0.5, 0.0, 0.0]},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["simulate", "--config", cfg]) == 0
        _, rows = read_csv(tmp_path / "out" / "trajectory.csv")
        assert float(rows[0][2]) == 4.0

    def test_seed_env_override(self, tmp_path, simulate_config, monkeypatch):
        main(["simulate", "--config", simulate_config, "--out", str(tmp_path / "a")])
        monkeypatch.setenv("CHAOS_MM_SEED", "99")
        main(["simulate", "--config", simulate_config, "--out", str(tmp_path / "b")])
        meta = json.loads((tmp_path / "b" / "simulate_metadata.json").read_text())
        assert meta["master_seed"] == 99
        a = (tmp_path / "a" / "trajectory.csv").read_bytes()
        b = (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert a != b

    def test_exhausted_sampling_exits_3(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(),
            "integrator": {"dt": 0.01, "n_steps": 100},
            "experiment": {"kind": "simulate", "energy_target": 1e9,
                           "sampling_box": {"q1": [2.0, 4.0], "q2": [-1, 1],
                                            "p1": [-1, 1], "p2": [-1, 1]}},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["simulate", "--config", cfg]) == 3


class TestPoincare:
    def test_grid_produces_one_file_per_combo(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.001),
            "integrator": {"dt": 0.01, "n_steps": 5000},
            "experiment": {"kind": "poincare", "energy_targets": [1.0],
                           "epsilons": [0.0001, 0.001], "n_paths": 3,
                           "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["poincare", "--config", cfg]) == 0
        for eps in ("0.0001", "0.001"):
            header, rows = read_csv(tmp_path / "out" / f"poincare_E1_eps{eps}.csv")
            assert header == ["path_id", "t_cross", "x", "p_x"]
            assert rows, "expected crossings"

    def test_empty_section_writes_header_only(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(),
            "integrator": {"dt": 0.01, "n_steps": 5},
            "experiment": {"kind": "poincare", "energy_target": 1.0,
                           "n_paths": 2, "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["poincare", "--config", cfg]) == 0
        text = (tmp_path / "out" / "poincare.csv").read_text()
        assert text == "path_id,t_cross,x,p_x\n"

    def test_svg_emitted_on_request(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.0001),
            "integrator": {"dt": 0.01, "n_steps": 20000},
            "experiment": {"kind": "poincare", "energy_target": 1.0,
                           "n_paths": 2, "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["poincare", "--config", cfg, "--svg"]) == 0
        svg = (tmp_path / "out" / "poincare.svg").read_text()
        assert svg.startswith("<svg")
        _, rows = read_csv(tmp_path / "out" / "poincare.csv")
        assert svg.count("<circle") == len(rows)

    def test_workers_do_not_change_output(self, tmp_path):
        payload = {
            "model": model_block(epsilon=0.001),
            "integrator": {"dt": 0.02, "n_steps": 2000},
            "experiment": {"kind": "poincare", "energy_target": 1.0,
                           "n_paths": 140, "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        }
        cfg = write_config(tmp_path, payload)
        main(["poincare", "--config", cfg, "--out", str(tmp_path / "w1"), "--workers", "1"])
        main(["poincare", "--config", cfg, "--out", str(tmp_path / "w3"), "--workers", "3"])
        assert (tmp_path / "w1" / "poincare.csv").read_bytes() == \
            (tmp_path / "w3" / "poincare.csv").read_bytes()


class TestLyapunov:
    def test_zero_epsilon_reports_zero_entropy_rate(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.0),
            "integrator": {"dt": 0.05, "n_steps": 20000},
            "experiment": {"kind": "lyapunov", "energy_target": 1.0,
                           "epsilons": [0.0], "n_paths": 1, "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["lyapunov", "--config", cfg]) == 0
        header, rows = read_csv(tmp_path / "out" / "lyapunov.csv")
        assert header == ["epsilon", "path_id", "lambda_1", "lambda_2",
                          "lambda_3", "lambda_4", "h_ks"]
        per_path = [r for r in rows if r[1] == "0"]
        assert float(per_path[0][6]) == 0.0

    def test_aggregate_rows_ordered(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.1),
            "integrator": {"dt": 0.05, "n_steps": 10000},
            "experiment": {"kind": "lyapunov", "energy_target": 5.0,
                           "epsilons": [0.1], "n_paths": 3, "master_seed": 5},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["lyapunov", "--config", cfg]) == 0
        _, rows = read_csv(tmp_path / "out" / "lyapunov.csv")
        agg = {r[1]: float(r[6]) for r in rows if r[1] in ("min", "max", "mean")}
        assert agg["max"] >= agg["mean"] >= agg["min"]


class TestKamCheck:
    def test_zero_epsilon_row(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.0),
            "integrator": {"dt": 0.01, "n_steps": 131072, "record_every": 10},
            "experiment": {"kind": "kam_check", "i_x": 0.1, "i_v": 0.1,
                           "epsilons": [0.0]},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["kam-check", "--config", cfg]) == 0
        header, rows = read_csv(tmp_path / "out" / "kam.csv")
        assert header == ["epsilon", "i_x", "i_v", "omega_x", "omega_v",
                          "omega_x_pred", "omega_v_pred", "omega_x_measured",
                          "resonance_distance"]
        row = rows[0]
        measured = float(row[7])
        assert abs(measured - float(row[5])) <= 1e-3
        assert abs(measured - float(row[3])) <= 1e-3
        assert float(row[8]) == pytest.approx(math.sqrt(0.11) - math.sqrt(0.1), abs=1e-6)

    def test_requires_static_quadratic_model(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "model": {"kind": "dynamic_risk", "k_x": 0.11, "x_0": 3.0,
                      "epsilon": 0.05},
            "integrator": {"dt": 0.01, "n_steps": 100},
            "experiment": {"kind": "kam_check", "i_x": 0.1, "i_v": 0.1,
                           "epsilons": [0.0]},
        })
        assert main(["kam-check", "--config", cfg]) == 2


class TestSampleHist:
    def test_counts_and_sampling(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.1),
            "integrator": {"dt": 0.01, "n_steps": 10000},
            "experiment": {"kind": "sample_hist", "energy_target": 10.6,
                           "master_seed": 3, "every_n": 100, "n_bins": 20},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["sample-hist", "--config", cfg]) == 0
        _, samples = read_csv(tmp_path / "out" / "sampled.csv")
        assert len(samples) == 101
        _, hist_rows = read_csv(tmp_path / "out" / "hist.csv")
        assert len(hist_rows) == 20
        assert sum(int(r[2]) for r in hist_rows) == 101


class TestPotentialGrid:
    def test_grid_output(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.02, x_0=1.0),
            "integrator": {"dt": 0.01, "n_steps": 1},
            "experiment": {"kind": "potential_grid", "x_range": [-1.0, 3.0],
                           "v_range": [-2.0, 2.0], "n": 21},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["potential-grid", "--config", cfg]) == 0
        header, rows = read_csv(tmp_path / "out" / "potential.csv")
        assert header == ["x", "v", "V"]
        assert len(rows) == 21 * 21
        # x-major ordering: first 21 rows share the first x
        assert len({r[0] for r in rows[:21]}) == 1
        # minimum at the equilibrium point (x_0 = 1, v = 0)
        vals = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
        arg = vals[:, 2].argmin()
        assert vals[arg, 0] == pytest.approx(1.0)
        assert vals[arg, 1] == pytest.approx(0.0)

    def test_zero_epsilon_grid_is_separable(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": model_block(epsilon=0.0),
            "integrator": {"dt": 0.01, "n_steps": 1},
            "experiment": {"kind": "potential_grid", "x_range": [0.0, 6.0],
                           "v_range": [-2.0, 2.0], "n": 11},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["potential-grid", "--config", cfg]) == 0
        _, rows = read_csv(tmp_path / "out" / "potential.csv")
        vals = np.array([[float(c) for c in r] for r in rows])
        V = vals[:, 2].reshape(11, 11)
        xs = vals[::11, 0]
        vs = vals[:11, 1]
        expected = (0.5 * 0.11 * (xs - 3.0) ** 2)[:, None] + (0.5 * 0.1 * vs ** 2)[None, :]
        assert np.allclose(V, expected, atol=1e-12)
