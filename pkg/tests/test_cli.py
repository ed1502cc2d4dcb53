import json

import numpy as np
import pytest

from drlyap import cli, files
from drlyap.nnlf import MlpLyapunov, TrainingDivergence, init_model


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg, *extra, out="out"):
    return cli.main([command, write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])


def poly(n, *terms):
    return {"n_vars": n, "terms": [[list(m), c] for m, c in terms]}


ZERO = poly(2)
CASE1_DRCC = {"system": {"builtin": "poly-case1"}, "formulation": {"kind": "drcc", "radius": 0.25, "beta": 0.1}}


class TestConfig:
    def test_defaults(self):
        cfg = cli.resolve_config({"system": {"builtin": "poly-case2"}})
        assert cfg.samples.n == 9
        assert cfg.ambiguity.radius == 0.15
        assert cfg.resolved["samples"]["distribution"]["mean"] == [6.0, 0.0]

    def test_beta_guard(self):
        with pytest.raises(cli.ConfigError, match="beta exceeds 1/N"):
            cli.resolve_config({"system": {"builtin": "poly-case1"}, "formulation": {"kind": "cc", "beta": 0.5}})

    def test_unknown_system(self):
        with pytest.raises(cli.ConfigError):
            cli.resolve_config({"system": {"builtin": "rocket"}})

    def test_seed_override(self):
        a = cli.resolve_config({"seed": 1, "samples": {"seed": 4}}, seed=7)
        assert a.resolved["samples"]["seed"] == 7
        assert a.train.seed == 7 and a.validate.seed == 7

    def test_inline_system(self):
        raw = {
            "system": {
                "f": [poly(2, ((1, 0), -1.0)), poly(2, ((0, 1), -1.0))],
                "d": [[poly(2, ((0, 0), 1.0)), ZERO]],
                "region": [[-1, 1], [-1, 1]],
            },
            "samples": {"values": [[0.0]]},
        }
        cfg = cli.resolve_config(raw)
        assert cfg.system.n == 2 and cfg.system.m == 1

    def test_json_error_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"system": {\n  "builtin": }\n}')
        with pytest.raises(cli.ConfigError, match="line 2 column"):
            cli.load_config(path)

    def test_resolved_round_trip(self):
        cfg = cli.resolve_config(CASE1_DRCC)
        again = cli.resolve_config(json.loads(json.dumps(cfg.resolved)))
        assert again.resolved == cfg.resolved
        np.testing.assert_array_equal(again.samples.samples, cfg.samples.samples)


class TestCommands:
    def test_synth_case1_drcc(self, tmp_path):
        assert run(tmp_path, "synth", CASE1_DRCC) == cli.EXIT_OK
        cert = files.read_json(tmp_path / "out" / "certificate.json")
        assert cert["format"] == files.CERTIFICATE_FORMAT
        assert len(cert["constraints"]) == 37
        summary = files.read_json(tmp_path / "out" / "summary.json")
        assert summary["result"]["verified"] is True

    def test_synth_infeasible_exit(self, tmp_path):
        f = [poly(2, ((1, 0), 1.0)), poly(2, ((0, 1), 1.0))]
        raw = {"system": {"f": f, "d": [[ZERO, ZERO]], "region": [[-1, 1], [-1, 1]]}, "formulation": {"degree": 2}}
        assert run(tmp_path, "synth", raw) == cli.EXIT_INFEASIBLE

    def test_config_errors_exit_3(self, tmp_path, capsys):
        assert run(tmp_path, "synth", {"system": {"builtin": "poly-case1"}, "formulation": {"kind": "cc", "beta": 0.5}}) == cli.EXIT_CONFIG
        assert "beta exceeds 1/N" in capsys.readouterr().err
        assert run(tmp_path, "synth", {"system": {"builtin": "nope"}}) == cli.EXIT_CONFIG

    def test_synth_idempotent(self, tmp_path):
        run(tmp_path, "synth", CASE1_DRCC, out="a")
        run(tmp_path, "synth", CASE1_DRCC, out="b")
        assert (tmp_path / "a" / "certificate.json").read_bytes() == (tmp_path / "b" / "certificate.json").read_bytes()
        sa = files.read_json(tmp_path / "a" / "summary.json")
        sb = files.read_json(tmp_path / "b" / "summary.json")
        sa.pop("metadata")
        sb.pop("metadata")
        assert sa == sb

    def test_rerun_from_resolved_config(self, tmp_path):
        run(tmp_path, "synth", CASE1_DRCC, out="a")
        resolved = files.read_json(tmp_path / "a" / "summary.json")["config"]
        run(tmp_path, "synth", resolved, out="b")
        assert (tmp_path / "a" / "certificate.json").read_bytes() == (tmp_path / "b" / "certificate.json").read_bytes()

    def test_train_zero_epochs(self, tmp_path):
        assert run(tmp_path, "train", {"system": {"builtin": "poly-case2"}, "train": {"epochs": 0}}) == cli.EXIT_OK
        m = MlpLyapunov.load(tmp_path / "out" / "checkpoint.json")
        ref = init_model(cli.resolve_config({"train": {"epochs": 0}}).train, 2)
        for a, b in zip(m.params, ref.params):
            np.testing.assert_array_equal(a, b)

    def test_train_divergence_exit(self, tmp_path, monkeypatch):
        def boom(cfg, system, samples=None, model=None):
            raise TrainingDivergence("loss diverged at epoch 3", init_model(cfg, system.n), [1.0, 2.0, 3.0], 3)

        monkeypatch.setattr(cli, "train", boom)
        assert run(tmp_path, "train", {"train": {"epochs": 5}}) == cli.EXIT_NUMERICAL
        assert (tmp_path / "out" / "checkpoint.json").exists()

    def test_validate(self, tmp_path):
        nominal = {"system": {"builtin": "poly-case1"}}
        run(tmp_path, "synth", nominal, out="s")
        cfg = {**nominal, "validate": {"online": {"kind": "point", "value": [0.0, 0.0]}, "realizations": 3, "points": 200}}
        code = run(tmp_path, "validate", cfg, "--candidate", str(tmp_path / "s" / "certificate.json"))
        assert code == cli.EXIT_OK
        summary = files.read_json(tmp_path / "out" / "summary.json")
        assert summary["result"]["violation_rate"] == 0.0
        assert len((tmp_path / "out" / "report.csv").read_text().splitlines()) == 4

    def test_validate_nn_checkpoint(self, tmp_path):
        run(tmp_path, "train", {"train": {"epochs": 2, "batch_size": 16}}, out="t")
        cfg = {"validate": {"realizations": 2, "points": 50}}
        assert run(tmp_path, "validate", cfg, "--candidate", str(tmp_path / "t" / "checkpoint.json")) == cli.EXIT_OK
        assert files.read_json(tmp_path / "out" / "summary.json")["result"]["config"]["candidate_kind"] == "nn-checkpoint"

    def test_missing_candidate(self, tmp_path, capsys):
        assert run(tmp_path, "validate", {}, "--candidate", str(tmp_path / "nope.json")) == cli.EXIT_CONFIG
        assert "no such file" in capsys.readouterr().err

    def test_radius(self, tmp_path, capsys):
        cfg = {"radius": {"n_samples": 10, "m": 3, "alpha": float(np.exp(-1)), "c1": 1.0, "c2": 1.0, "rho": 2.0}}
        assert run(tmp_path, "radius", cfg) == cli.EXIT_OK
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.1 ** (1 / 3), abs=1e-12)

    def test_radius_m2(self, tmp_path):
        cfg = {"radius": {"n_samples": 10, "m": 2, "alpha": 0.1, "c1": 1.0, "c2": 1.0, "rho": 2.0}}
        assert run(tmp_path, "radius", cfg) == cli.EXIT_CONFIG

    def test_heatgrid(self, tmp_path):
        run(tmp_path, "synth", CASE1_DRCC, out="s")
        cfg = {**CASE1_DRCC, "heatgrid": {"xi": [5.0, 3.0], "resolution": 3}}
        assert run(tmp_path, "heatgrid", cfg, "--candidate", str(tmp_path / "s" / "certificate.json")) == cli.EXIT_OK
        assert len((tmp_path / "out" / "heatgrid.csv").read_text().splitlines()) == 10

    def test_reproduce_table1_small(self, tmp_path):
        cfg = {
            "system": {"builtin": "poly-case2"},
            "validate": {"realizations": 5, "points": 100},
            "table1": {"nn": {"epochs": 3, "batch_size": 32}},
        }
        assert run(tmp_path, "reproduce-table1", cfg) == cli.EXIT_OK
        rows = (tmp_path / "out" / "table1.csv").read_text().splitlines()
        assert len(rows) == 7
        assert rows[0] == "formulation,uniform_rate,uniform_area,gaussian_rate,gaussian_area"
        assert len(list((tmp_path / "out" / "reports").glob("*.uniform.csv"))) == 6
