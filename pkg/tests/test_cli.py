import json
import os

import pytest

from privfed import cli
from privfed.config import OUTPUT_DIR_ENV, apply_overrides, default_config_dict, load_config, parse_config
from privfed.errors import ConfigError

from conftest import FERNET_VECTORS, PIMA_CSV

FAST = {"rounds": 2, "gbdt": {"trees_total": 20}}


def write_cfg(tmp_path, **fields):
    doc = {"dataset_path": PIMA_CSV, "output_dir": str(tmp_path / "out"), **fields}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def read_outputs(d):
    return {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d))}


def test_run_writes_three_files(tmp_path, capsys):
    assert cli.main(["run", "--config", write_cfg(tmp_path, **FAST)]) == 0
    assert sorted(os.listdir(tmp_path / "out")) == ["report.json", "table.txt", "trajectory.csv"]
    out = capsys.readouterr().out
    assert "Global Model" in out and "Impact of Encryption" in out


def test_default_config_runs(tmp_path):
    assert cli.main(["run", "--config", write_cfg(tmp_path)]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["config"]["k_clients"] == 3 and report["config"]["rounds"] == 5
    assert len(report["rows"]) == 5


def test_unknown_field_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", write_cfg(tmp_path, epsilonn=2.0)]) == 2
    err = capsys.readouterr().err
    assert "epsilonn" in err and len(err.strip().splitlines()) == 1
    assert cli.main(["run", "--config", write_cfg(tmp_path, dp={"epsilonn": 2.0})]) == 2
    assert "dp.epsilonn" in capsys.readouterr().err


def test_bad_values_exit_2(tmp_path):
    assert cli.main(["run", "--config", write_cfg(tmp_path, rounds=3)]) == 2
    assert cli.main(["run", "--config", write_cfg(tmp_path, dp={"epsilon": -1})]) == 2
    assert cli.main(["run", "--config", write_cfg(tmp_path, k_clients="3")]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_missing_dataset_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dataset_path=str(tmp_path / "nope.csv"))
    assert cli.main(["run", "--config", cfg]) == 3
    assert "data error" in capsys.readouterr().err


def test_training_failure_exit_5(tmp_path, capsys):
    # a 0.99 threshold on a 5-tree model predicts no positives: every F1 is 0
    cfg = write_cfg(tmp_path, rounds=1, gbdt={"trees_total": 5}, decision_threshold=0.99)
    assert cli.main(["run", "--config", cfg]) == 5
    assert "AllZeroMass" in capsys.readouterr().err


def test_override_precedence(tmp_path, monkeypatch):
    cfg = load_config(write_cfg(tmp_path, master_seed=5, rounds=4, dp={"epsilon": 2.0, "mechanism": "laplace_score"}))
    fed = cfg.federation
    assert (fed.master_seed, fed.rounds, fed.dp.epsilon, fed.dp.mechanism) == (5, 4, 2.0, "laplace_score")
    assert fed.encryption_enabled
    env = {OUTPUT_DIR_ENV: "from-env"}
    o = apply_overrides(cfg, seed=9, rounds=2, epsilon=1.0, mechanism="randomized_response",
                        no_encryption=True, environ=env)
    f = o.federation
    assert (f.master_seed, f.rounds, f.dp.epsilon, f.dp.mechanism, f.encryption_enabled) == (
        9, 2, 1.0, "randomized_response", False)
    assert o.output_dir == "from-env"
    assert apply_overrides(cfg, out="from-cli", environ=env).output_dir == "from-cli"
    assert apply_overrides(cfg, environ={}).output_dir == str(tmp_path / "out")
    d = parse_config({})
    assert (d.federation.k_clients, d.federation.rounds, d.federation.dp.epsilon, d.output_dir) == (3, 5, 3.5, "out")
    with pytest.raises(ConfigError):
        apply_overrides(cfg, epsilon=0.0, environ={})


def test_default_config_dict_round_trips():
    assert parse_config(default_config_dict()).federation == parse_config({}).federation


def test_idempotent_and_serial(tmp_path):
    cfg = write_cfg(tmp_path, **FAST)
    assert cli.main(["run", "--config", cfg]) == 0
    first = read_outputs(tmp_path / "out")
    assert cli.main(["run", "--config", cfg]) == 0
    assert read_outputs(tmp_path / "out") == first
    assert cli.main(["run", "--config", cfg, "--serial", "--out", str(tmp_path / "serial")]) == 0
    assert read_outputs(tmp_path / "serial") == first


def test_no_encryption_flag(tmp_path):
    cfg = write_cfg(tmp_path, **FAST)
    assert cli.main(["run", "--config", cfg, "--no-encryption", "--out", str(tmp_path / "plain")]) == 0
    rep = json.loads((tmp_path / "plain" / "report.json").read_text())
    assert rep["config"]["encryption_enabled"] is False


def test_split_manifest(tmp_path, capsys):
    assert cli.main(["split", "--config", write_cfg(tmp_path)]) == 0
    m = json.loads(capsys.readouterr().out)
    assert len(m["test"]["row_ids"]) == 153
    assert [len(c["row_ids"]) for c in m["clients"]] == [205, 205, 205]


def test_keygen(capsys):
    assert cli.main(["keygen"]) == 0
    assert len(capsys.readouterr().out.strip()) == 44
    cli.main(["keygen", "--seed", "4"])
    a = capsys.readouterr().out
    cli.main(["keygen", "--seed", "4"])
    assert capsys.readouterr().out == a


def test_encrypt_decrypt_files(tmp_path, capsys):
    cli.main(["keygen"])
    key = tmp_path / "k"
    key.write_text(capsys.readouterr().out)
    src = tmp_path / "in.bin"
    src.write_bytes(os.urandom(1024))
    assert cli.main(["encrypt", "--key", str(key), str(src), str(tmp_path / "tok")]) == 0
    assert cli.main(["decrypt", "--key", str(key), "--ttl", "3600", str(tmp_path / "tok"), str(tmp_path / "out.bin")]) == 0
    assert (tmp_path / "out.bin").read_bytes() == src.read_bytes()

    cli.main(["keygen"])
    other = tmp_path / "k2"
    other.write_text(capsys.readouterr().out)
    assert cli.main(["decrypt", "--key", str(other), str(tmp_path / "tok"), str(tmp_path / "x")]) == 4
    assert "InvalidSignature" in capsys.readouterr().err


def test_decrypt_official_vector(tmp_path):
    v = json.load(open(os.path.join(FERNET_VECTORS, "verify.json")))[0]
    (tmp_path / "k").write_text(v["secret"])
    (tmp_path / "t").write_text(v["token"])
    assert cli.main(["decrypt", "--key", str(tmp_path / "k"), str(tmp_path / "t"), str(tmp_path / "o")]) == 0
    assert (tmp_path / "o").read_bytes() == b"hello"


def test_fetch_instructions(capsys):
    assert cli.main(["run", "--fetch-instructions"]) == 0
    assert "Outcome" in capsys.readouterr().out
