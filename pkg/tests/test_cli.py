"""Config plumbing and the command runner's exit-code contract.

Exit codes: 0 success, 2 invalid configuration, 3 numeric failure with a
certificate, 4 completed run whose verdicts include a FAIL.
"""

import json

import numpy as np
import pytest

from volterra_spde.cli import (DEFAULT_SEED, apply_override, config_hash,
                               main, parse_config, run, serialize_config,
                               validate_config)
from volterra_spde.errors import ConfigurationError, ParameterError
from volterra_spde.processes import PathEnsemble


def _cfg(*overrides):
    cfg = parse_config("")
    for o in overrides:
        apply_override(cfg, o)
    return cfg


# ---------------------------------------------------------------------------
# parsing, overrides, hashing
# ---------------------------------------------------------------------------

def test_defaults_and_parse_errors():
    cfg = parse_config("")
    assert cfg["command"] == "simulate"
    assert cfg["mc"]["seed"] == DEFAULT_SEED
    assert cfg["driver"]["H"] == 0.75
    partial = parse_config('{"mc": {"replicas": 50}}')
    assert partial["mc"]["replicas"] == 50
    assert partial["mc"]["seed"] == DEFAULT_SEED
    with pytest.raises(ConfigurationError):
        parse_config('{"bogus": 1}')
    with pytest.raises(ConfigurationError):
        parse_config('{"mc": 3}')
    with pytest.raises(ConfigurationError):
        parse_config("not json {")
    with pytest.raises(ConfigurationError):
        parse_config("[1, 2]")


def test_serialize_round_trip():
    cfg = _cfg("mc.replicas=123", "driver.H=0.8")
    assert parse_config(serialize_config(cfg)) == cfg
    assert serialize_config(cfg).endswith("\n")


def test_override_typing():
    cfg = parse_config("")
    apply_override(cfg, "mc.replicas=500")
    assert cfg["mc"]["replicas"] == 500
    apply_override(cfg, "driver.certify=true")
    assert cfg["driver"]["certify"] is True
    apply_override(cfg, "noise.phi_rule=[1.0, 0.5]")
    assert cfg["noise"]["phi_rule"] == [1.0, 0.5]
    apply_override(cfg, "output.directory=/tmp/out")   # bare string stays raw
    assert cfg["output"]["directory"] == "/tmp/out"
    with pytest.raises(ConfigurationError):
        apply_override(cfg, "mc.bogus=1")
    with pytest.raises(ConfigurationError):
        apply_override(cfg, "nope.deep.path=1")
    with pytest.raises(ConfigurationError):
        apply_override(cfg, "no-equals-sign")


def test_config_hash_is_stable_and_sensitive():
    a, b = parse_config(""), parse_config("")
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 16
    apply_override(b, "mc.seed=1")
    assert config_hash(a) != config_hash(b)


def test_validation_names_the_inequality():
    with pytest.raises(ParameterError, match="driver.H must satisfy"):
        validate_config(_cfg("driver.H=1.3"))
    with pytest.raises(ConfigurationError, match="command"):
        validate_config(_cfg('command="explode"'))
    with pytest.raises(ConfigurationError, match="noise.kind"):
        validate_config(_cfg('noise.kind="white"'))
    with pytest.raises(ParameterError, match="nodes"):
        validate_config(_cfg("model.modes=300"))
    # factorize pulls in the exponent bundle constraints
    with pytest.raises(ParameterError, match="beta"):
        validate_config(_cfg('command="factorize"', "params.beta=0.7",
                             "params.delta=0.2"))
    validate_config(_cfg())


# ---------------------------------------------------------------------------
# runner exit codes and artifacts
# ---------------------------------------------------------------------------

def test_run_invalid_config_exits_2(tmp_path):
    cfg = _cfg("driver.H=1.3", f"output.directory={tmp_path}")
    assert run(cfg) == 2
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["error"] == "ParameterError"
    assert "driver.H" in err["message"]
    assert not (tmp_path / "manifest.json").exists()


def test_run_simulate_writes_manifest_and_ensemble(tmp_path):
    cfg = _cfg("mc.replicas=500", "grids.n_steps=128",
               f"output.directory={tmp_path}")
    assert run(cfg) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == DEFAULT_SEED
    assert manifest["config_hash"] == config_hash(cfg)
    assert manifest["verdicts"] == {"covariance": True}
    assert set(manifest["artifacts"]) == {"ensemble.csv",
                                          "covariance_check.json"}
    assert manifest["versions"]["volterra_spde"]
    assert manifest["wall_clock_s"] > 0.0
    ens = PathEnsemble.from_csv(str(tmp_path / "ensemble.csv"))
    assert ens.values.shape == (500, 129)
    assert np.all(ens.values[:, 0] == 0.0)
    check = json.loads((tmp_path / "covariance_check.json").read_text())
    assert check["covariance_ok"]


def test_run_truncation_failure_exits_3(tmp_path):
    # certified Rosenblatt run at default truncation: the convergence
    # check must refuse rather than deliver biased samples
    cfg = _cfg('driver.family="rosenblatt"', "driver.certify=true",
               "driver.inner=256", "grids.n_steps=64", "mc.replicas=50",
               f"output.directory={tmp_path}")
    assert run(cfg) == 3
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["error"] == "TruncationError"
    assert err["drift"] > 0.02
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "numeric_failure" in manifest


def test_run_failed_verdict_exits_4(tmp_path):
    # smoothed diagonal coefficients kill the power-law decay, so the
    # gamma fit must flag itself and fail the verdict
    cfg = _cfg('command="gamma-decay"', 'noise.phi_rule="smoothed"',
               f"output.directory={tmp_path}")
    assert run(cfg) == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["verdicts"] == {"gamma_decay": False}
    report = json.loads((tmp_path / "gamma_decay.json").read_text())
    assert report["fit_warning"]
    assert abs(report["gamma_hat"]) < 0.05


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("VOLTERRA_SPDE_OUTPUT", str(tmp_path / "envdir"))
    cfg = _cfg("driver.H=1.3")
    assert cfg["output"]["directory"] is None
    assert run(cfg) == 2
    assert (tmp_path / "envdir" / "error.json").exists()


# ---------------------------------------------------------------------------
# argv entry point
# ---------------------------------------------------------------------------

def test_main_applies_flags(tmp_path):
    rc = main(["simulate", "--set", "mc.replicas=500",
               "--set", "grids.n_steps=128",
               "--output", str(tmp_path), "--seed", "7"])
    assert rc == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["config"]["mc"]["replicas"] == 500
    assert manifest["config"]["output"]["directory"] == str(tmp_path)


def test_main_reads_config_file(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text('{"mc": {"replicas": 500}, "grids": {"n_steps": 128}}')
    rc = main(["simulate", "--config", str(cfg_path),
               "--output", str(tmp_path / "out")])
    assert rc == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config"]["mc"]["replicas"] == 500


def test_main_rejects_bad_input(tmp_path, capsys):
    assert main(["simulate", "--set", "mc.bogus=1",
                 "--output", str(tmp_path)]) == 2
    assert "validation error" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json"),
                 "--output", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["no-such-command"])
