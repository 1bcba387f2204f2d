import json
import math

import numpy as np
import pytest
from pytest import approx

from fhn_spectral import build_eigenbasis
from fhn_spectral.cli import EXIT_BLOWUP, EXIT_CONFIG, main
from fhn_spectral.config import (
    ConfigError,
    build_noise,
    build_params,
    build_run_config,
    build_x0,
    load_config,
    merge_config,
)


class TestConfigValidation:
    def test_defaults_merge(self):
        cfg = merge_config({})
        assert cfg["model"]["alpha"] == 1.0
        assert cfg["noise"]["sigma2"] == 0.01
        assert cfg["paths"] == 64

    @pytest.mark.parametrize(
        "raw,path",
        [
            ({"bogus": 1}, "bogus"),
            ({"model": {"alphaa": 1.0}}, "model.alphaa"),
            ({"run": {"dt": -1.0}}, "run.dt"),
            ({"run": {"drift": "nope"}}, "run.drift"),
            ({"run": {"x0": {"kind": "wavelet"}}}, "run.x0.kind"),
            ({"run": {"x0": {"kind": "zero", "u": 1}}}, "run.x0.u"),
            ({"master_seed": -3}, "master_seed"),
            ({"paths": 0}, "paths"),
            ({"model": {"alpha": "one"}}, "model.alpha"),
            ({"noise": {"lambda1": [1.0]}}, "noise.lambda1"),
        ],
    )
    def test_rejections_carry_path(self, raw, path):
        with pytest.raises(ConfigError) as err:
            merge_config(raw)
        assert path in str(err.value)

    def test_noise_tables_accepted(self):
        n = 32
        cfg = merge_config(
            {"noise": {"lambda1": [0.1] * n, "lambda2": [0.2] * n}}
        )
        spec = build_noise(cfg)
        assert spec.lambda1[0] == 0.1 and spec.lambda2[0] == 0.2

    def test_profile_tables(self):
        cfg = merge_config({"model": {"c": [1.0] * 64, "p": [0.4] * 64}})
        params = build_params(cfg)
        assert params.c_is_constant and params.p_min == approx(0.4)

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_load_config_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "line" in str(err.value)


class TestX0Builders:
    def test_zero(self, params, basis):
        assert build_x0({"kind": "zero"}, params, basis) is None

    def test_constant(self, params, basis):
        x = build_x0({"kind": "constant", "u": 2.0, "w": -1.0}, params, basis)
        assert x.u_hat[0] == approx(2.0)
        assert x.w_hat[0] == approx(-1.0)
        assert np.abs(x.u_hat[1:]).max() < 1e-12

    def test_cosine(self, params, basis):
        x = build_x0({"kind": "cosine", "u_amplitude": 3.0, "u_mode": 2}, params, basis)
        assert x.u_hat[2] == approx(3.0 / math.sqrt(2.0))
        assert np.all(x.w_hat == 0.0)

    def test_coeffs(self, params, basis):
        x = build_x0({"kind": "coeffs", "u_hat": [1.0, 2.0], "w_hat": [0.5]}, params, basis)
        assert x.u_hat[1] == 2.0 and x.w_hat[0] == 0.5

    def test_scaled(self, params, basis):
        x = build_x0(
            {"kind": "scaled", "base": {"kind": "constant", "u": 1.0}, "h_norm": 5.0},
            params,
            basis,
        )
        norm = math.sqrt(params.gamma * x.u_hat @ x.u_hat + x.w_hat @ x.w_hat)
        assert norm == approx(5.0)

    def test_run_config_build(self):
        cfg = merge_config({"run": {"T": 2.0, "dt": 0.01, "eps": 0.1}})
        params = build_params(cfg)
        basis = build_eigenbasis(params)
        run_cfg = build_run_config(cfg, params, basis)
        assert run_cfg.n_steps == 200 and run_cfg.eps == 0.1


class TestCLI:
    def test_paths_zero_is_config_error(self, tmp_path, capsys):
        rc = main(["simulate", "--paths", "0", "--out", str(tmp_path / "o")])
        assert rc == EXIT_CONFIG
        assert "paths" in capsys.readouterr().err

    def test_bad_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": {"alphaa": 2}}))
        rc = main(["eigen", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == EXIT_CONFIG

    def test_eigen_outputs(self, tmp_path):
        out = tmp_path / "eig"
        rc = main(["eigen", "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["mu"][1] == approx(-math.pi**2)
        assert summary["version"]
        assert summary["config"]["model"]["alpha"] == 1.0
        header = (out / "eigenbasis.csv").read_text().splitlines()[0]
        assert header.split(",")[:2] == ["xi", "e_0"]

    def test_simulate_and_reproducibility(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run": {"T": 0.05, "dt": 1e-3, "record_every": 10}, "paths": 3}))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        for name in ("path_0000.csv", "path_0002.csv", "summary.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run": {"T": 0.05, "dt": 1e-3}, "paths": 1}))
        main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(out1)])
        main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(out2)])
        assert (out1 / "path_0000.csv").read_bytes() != (out2 / "path_0000.csv").read_bytes()

    def test_blowup_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "run": {"T": 0.01, "dt": 1e-3, "x0": {"kind": "constant", "u": 1e7}},
                    "noise": {"sigma2": 0.0, "s": 1.0},
                    "paths": 1,
                }
            )
        )
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == EXIT_BLOWUP

    def test_dynkin_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "model": {"gamma": 1.0},
                    "run": {"T": 0.1, "dt": 1e-3, "drift": "linear"},
                    "dynkin": {"h_u": [[0, 0.4]], "t": 0.1},
                    "paths": 16,
                }
            )
        )
        out = tmp_path / "dyn"
        rc = main(["dynkin", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert abs(summary["residual"]) <= 5 * summary["se"] + 1e-3
        assert summary["n_rejected"] == 0

    def test_couple_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run": {"T": 0.5, "dt": 1e-3, "record_every": 50}, "paths": 2}))
        out = tmp_path / "couple"
        rc = main(["couple", "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["envelope_ok"] is True
        decay_lines = (out / "decay.csv").read_text().splitlines()
        assert decay_lines[0] == "t,delta_sq_0,delta_sq_1"

    def test_convergence_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "run": {"T": 0.1, "dt": 1e-3, "x0": {"kind": "cosine", "u_amplitude": 1.5, "u_mode": 1}},
                    "convergence": {"eps_ladder": [0.2, 0.1]},
                    "paths": 4,
                }
            )
        )
        out = tmp_path / "conv"
        assert main(["convergence", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert "slope" in summary

    def test_moments_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "run": {"T": 2.0, "dt": 2e-3, "record_every": 20,
                            "x0": {"kind": "constant", "u": 2.0}},
                    "paths": 8,
                }
            )
        )
        out = tmp_path / "mom"
        assert main(["moments", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["envelope_constants"]) == {"1", "2"}
        header = (out / "moments.csv").read_text().splitlines()[0]
        assert header == "t,m1,m1_se,m2,m2_se"

    def test_invariant_subcommand_with_pairing(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "model": {"p": 0.85},
                    "run": {"T": 1.0, "dt": 2e-3},
                    "invariant": {
                        "burn_in": 9.0,
                        "n_time_samples": 40,
                        "sample_spacing": 1.0,
                        "n_ensemble": 16,
                        "pairing_mode": 0,
                    },
                    "paths": 16,
                }
            )
        )
        out = tmp_path / "inv"
        assert main(["invariant", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["ks"]) == {"h_norm", "v_norm", "pairing_0"}
        assert (out / "hist_pairing_0.csv").exists()

    def test_module_entry_point(self):
        import subprocess
        import sys

        proc = subprocess.run(
            [sys.executable, "-m", "fhn_spectral", "--version"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip()

    def test_linear_oracle_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "run": {"T": 30.0, "dt": 0.05, "drift": "linear_eta"},
                    "linear_oracle": {"burn_in": 10.0},
                    "paths": 32,
                }
            )
        )
        out = tmp_path / "lo"
        assert main(["linear-oracle", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["max_rel_error_leading"] < 0.5
        first = (out / "covariances.csv").read_text().splitlines()[1].split(",")
        assert float(first[1]) == approx(0.0220779, abs=1e-5)
