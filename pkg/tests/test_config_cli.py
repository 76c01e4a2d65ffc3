import json

import pytest

from piqae.cli import main
from piqae.config import ConfigError, config_from_dict, load_config


def test_defaults_follow_model_family():
    cfg = config_from_dict({})
    assert (cfg.model.kind, cfg.model.hamiltonian, cfg.model.h_x, cfg.model.h_z) == ("square", "tfim", -3.05, 0.0)
    cfg = config_from_dict({"model": {"kind": "square", "hamiltonian": "mfim"}})
    assert cfg.model.h_z == 1.525
    cfg = config_from_dict({"model": {"kind": "guadalupe"}})
    assert (cfg.model.h_x, cfg.model.h_z, cfg.model.dims) == (-1.0, 0.5, [])


@pytest.mark.parametrize("data,field", [
    ({"modle": {}}, "modle"),
    ({"model": {"kind": "chain", "dims": [4], "hz": 1}}, "model.hz"),
    ({"model": {"kind": "mobius"}}, "model.kind"),
    ({"subspace": {"K": -1}}, "subspace.K"),
    ({"noise": {"lambdas": [1, 2]}}, "noise.lambdas"),
    ({"noise": {"lambdas": [1.5, 2, 3]}}, "noise.lambdas"),
    ({"selection": {"mode": "both"}}, "selection.mode"),
    ({"measurement": {"shots": "many"}}, "measurement.shots"),
])
def test_validation_names_field(data, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        config_from_dict(data)


def test_json_errors_report_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "model": {\n    "kind": "chain",,\n  }\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_hash_depends_on_content():
    a = config_from_dict({"seed": 1})
    b = config_from_dict({"seed": 2})
    assert a.config_hash != b.config_hash
    assert a.config_hash == config_from_dict({"seed": 1}).config_hash
    assert a.digest("model") == b.digest("model")


def test_cli_writes_csv_manifest_and_ed_cache(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"kind": "chain", "dims": [6]}, "ansatz": {"L": 1}, "subspace": {"K": 1}}))
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    csvs = list(out.glob("sweep_*.csv"))
    assert len(csvs) == 1
    text = csvs[0].read_text()
    assert "# seed: 3" in text and "L,K,basis,N_K,M" in text
    manifest = json.loads(next(out.glob("manifest_*.json")).read_text())
    assert manifest["outputs"]["sweep"]["file"] == csvs[0].name
    assert list((out / "cache").glob("ed_*.c16"))


def test_cli_flag_overrides_and_errors(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["model", "--out", str(out), "--noise-p", "0.01", "--lambda", "1,1.5,2", "--trajectories", "70"])
    assert code == 0
    manifest = json.loads(next(out.glob("manifest_*.json")).read_text())
    assert manifest["config"]["noise"] == {"p": 0.01, "lambdas": [1.0, 1.5, 2.0], "trajectories": 70,
                                          "estimator": "reweighted"}
    assert main(["model", "--out", str(out), "--lambda", "1,2"]) == 2
    assert "noise.lambdas" in capsys.readouterr().err
