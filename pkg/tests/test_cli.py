import json

import numpy as np
import pytest

from rtinverse.cli import main
from rtinverse.io import file_sha256, read_field


def tiny_config(**overrides):
    # same-grid data keeps these smoke runs fast and well-converged; the
    # honest cross-grid setting is what the acceptance benchmarks exercise
    base = {
        "recon_grid": {"nx": 33, "n_theta": 16},
        "data_grid": {"nx": 33, "n_theta": 16},
        "avoid_inverse_crime": False,
        "boundary": {"n_beta": 96, "n_alpha": 24},
        "sigma": {"kind": "constant", "params": {"value": 0.4}},
        "phantom": {"kind": "gaussian",
                    "params": {"center": [0.2, -0.1], "width": 0.25,
                               "amplitude": 1.0}},
        "transport": {"ray_step": 1.0 / 64},
        "recon": {"max_krylov_iter": 80, "krylov_tol": 1e-8},
    }
    base.update(overrides)
    return base


def write_config(tmp_path, name="cfg.json", **overrides):
    p = tmp_path / name
    p.write_text(json.dumps(tiny_config(**overrides)))
    return p


class TestForward:
    def test_artifacts_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["forward", "--config", str(cfg), "--output", str(out)]) == 0
        for name in ("u.f64", "u.json", "sinogram.csv", "sinogram.f64",
                     "forward_history.csv", "config.json", "manifest.json"):
            assert (out / name).exists(), name
        man = json.loads((out / "manifest.json").read_text())
        for name, digest in man["artifacts"].items():
            assert file_sha256(out / name) == digest
        assert man["run"]["command"] == "forward"
        assert man["run"]["neumann_terms"] >= 1

    def test_deterministic_artifacts(self, tmp_path):
        cfg = write_config(tmp_path,
                           kernel={"kind": "isotropic", "albedo_scale": 0.3})
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            assert main(["forward", "--config", str(cfg),
                         "--output", str(out)]) == 0
            outs.append(out)
        # config.json embeds the output path, so compare numeric payloads
        for name in ("u.f64", "sinogram.f64", "sinogram.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_supercritical_exits_3(self, tmp_path):
        cfg = write_config(tmp_path,
                           kernel={"kind": "isotropic", "albedo_scale": 50.0})
        assert main(["forward", "--config", str(cfg),
                     "--output", str(tmp_path / "out")]) == 3


class TestReconstruct:
    def test_noiseless_metrics(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["reconstruct", "--config", str(cfg),
                     "--output", str(out)]) == 0
        met = json.loads((out / "metrics.json").read_text())
        assert met["rel_l2"] < 0.05
        assert met["iterations"] >= 1
        f_hat = read_field(out / "f_hat")
        assert f_hat.values.shape == (33, 33)
        head = (out / "residuals.csv").read_text().splitlines()[0]
        assert head.startswith("iteration")

    def test_noisy_uses_discrepancy(self, tmp_path):
        cfg = write_config(tmp_path,
                           noise={"kind": "gaussian", "rel_level": 0.02})
        out = tmp_path / "out"
        assert main(["reconstruct", "--config", str(cfg),
                     "--output", str(out)]) == 0
        met = json.loads((out / "metrics.json").read_text())
        assert met["status"] == "discrepancy"
        assert met["tikhonov_alpha"] > 0

    def test_seed_override_recorded(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["reconstruct", "--config", str(cfg), "--seed", "17",
                     "--output", str(out)]) == 0
        written = json.loads((out / "config.json").read_text())
        assert written["seed"] == 17


class TestSelftest:
    def test_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["selftest", "--config", str(cfg)]) == 0
        text = capsys.readouterr().out
        assert "FAIL" not in text
        for token in ("santalo", "adjoint", "diam_bound", "k0"):
            assert token in text

    def test_break_adjoint_detected(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["selftest", "--config", str(cfg), "--break-adjoint"]) == 4

    def test_adjoint_test_command(self, tmp_path):
        cfg = write_config(tmp_path,
                           kernel={"kind": "isotropic", "albedo_scale": 0.3})
        assert main(["adjoint-test", "--config", str(cfg)]) == 0


class TestLambdaSweep:
    def test_sweep_rows(self, tmp_path):
        cfg = write_config(tmp_path,
                           kernel={"kind": "isotropic", "albedo_scale": 0.3},
                           recon={"max_krylov_iter": 40, "krylov_tol": 1e-6})
        out = tmp_path / "out"
        assert main(["lambda-sweep", "--config", str(cfg), "--output", str(out),
                     "--lambdas", "0,40"]) == 0
        lines = (out / "lambda_sweep.csv").read_text().splitlines()
        assert lines[0].split(",")[0] == "lambda"
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 2
        assert rows[0][-1] == "ok"
        assert float(rows[0][3]) < 0.2  # lambda=0 recon error
        assert rows[1][-1] == "noncontractive"

    def test_requires_kernel(self, tmp_path, capsys):
        cfg = write_config(tmp_path)  # kernel defaults to none
        assert main(["lambda-sweep", "--config", str(cfg),
                     "--output", str(tmp_path / "out")]) == 2
        assert "kernel" in capsys.readouterr().err

    def test_empty_lambda_list(self, tmp_path):
        cfg = write_config(tmp_path,
                           kernel={"kind": "isotropic", "albedo_scale": 0.3})
        assert main(["lambda-sweep", "--config", str(cfg),
                     "--lambdas", ",", "--output", str(tmp_path / "o")]) == 2


class TestConfigHandling:
    def test_bad_config_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"recon_grid": {"nx": 33, "rows": 1}}))
        assert main(["forward", "--config", str(p),
                     "--output", str(tmp_path / "out")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_example_config_round_trips(self, capsys):
        assert main(["example-config"]) == 0
        parsed = json.loads(capsys.readouterr().out)
        assert parsed["recon_grid"]["nx"] >= 8

    def test_measure_on_override(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["forward", "--config", str(cfg), "--output", str(out),
                     "--measure-on", "omega"]) == 0
        written = json.loads((out / "config.json").read_text())
        assert written["boundary"]["measure_on"] == "omega"
