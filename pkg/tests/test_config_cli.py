import io
import json

import pytest

from nvpair.cli import main
from nvpair.config import (ConfigError, RunManifest, format_csv, format_float,
                           load_config, validate_config_dict, write_csv)
from nvpair.noise import NoisePreset


def test_load_config_defaults():
    cfg = load_config(None)
    assert cfg.seed == 0
    assert cfg.trajectories == 4000
    assert cfg.threads == 1
    assert cfg.system().coupling_hz == pytest.approx(4.93e3)
    assert cfg.noise("a") is None
    assert cfg.emission().k0 == 0.4


def test_load_config_missing_file():
    with pytest.raises(ConfigError) as exc:
        load_config("/nonexistent/config.json")
    assert exc.value.code == "config_not_found"
    assert json.loads(exc.value.to_json())["code"] == "config_not_found"


def test_load_config_bad_json_and_bad_root(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.code == "config_invalid"
    p.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError):
        load_config(p)


def test_schema_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError):
        validate_config_dict({"unknown_section": {}})
    with pytest.raises(ConfigError):
        validate_config_dict({"noise": {"a": {"t2_star_s": 1e-6}}})
    with pytest.raises(ConfigError):
        validate_config_dict({"seed": -1})
    validate_config_dict({"seed": 3, "noise": {
        "a": {"t2_star_s": 1e-6, "t2_s": 1e-4}}})


def test_config_noise_accessor(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"noise": {"a": {
        "t2_star_s": 2e-6, "t2_s": 3e-4, "delta_ms_ref": 2}}}))
    cfg = load_config(p)
    assert cfg.noise("a") == NoisePreset(2e-6, 3e-4, delta_ms_ref=2)
    assert cfg.noise("b") is None
    assert cfg.sha256 != ""


def test_csv_formatting_round_trips_floats(tmp_path):
    x = 0.1 + 0.2
    assert float(format_float(x)) == x
    buf = io.StringIO()
    format_csv(buf, ("a", "b"), [(x, 7)])
    assert buf.getvalue() == f"a,b\n{format_float(x)},7\n"
    p = write_csv(tmp_path / "out.csv", ("a",), [(1.5,), (2.5,)])
    assert p.read_text() == "a\n1.5\n2.5\n"


def test_manifest_contents(tmp_path):
    m = RunManifest("deer", "abc", 3)
    m.add(tmp_path / "z.csv")
    m.add(tmp_path / "a.json")
    path = m.write(tmp_path)
    payload = json.loads(path.read_text())
    assert payload["command"] == "deer"
    assert payload["seed"] == 3
    assert payload["files"] == ["a.json", "z.csv"]


# --------------------------------------------------------------------------
# CLI entry-point behavior
# --------------------------------------------------------------------------

def test_cli_missing_config_exits_2(tmp_path, capsys):
    code = main(["deer", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == "config_not_found"


def test_cli_invalid_config_exits_2(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"bogus": 1}))
    code = main(["deer", "--config", str(p), "--out", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["code"] == "config_invalid"


def test_cli_unknown_subcommand_exits_2(capsys):
    code = main(["describe", "frobnicate"])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["code"] == "unknown_subcommand"
    assert main(["no-such-command"]) == 2


def test_cli_describe_prints_schema(capsys):
    assert main(["describe", "photon-corr"]) == 0
    out = capsys.readouterr().out
    assert "photon-corr:" in out
    assert "photon_corr" in out and "gate_ns" in out


def test_cli_deer_outputs_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert main(["deer", "--seed", "9", "--out", str(out)]) == 0
    capsys.readouterr()
    assert (out1 / "deer.csv").read_bytes() == (out2 / "deer.csv").read_bytes()
    fit = json.loads((out1 / "deer_fit.json").read_text())
    assert fit["relative_error"] < 1e-6
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["command"] == "deer"
    assert "deer.csv" in manifest["files"]
    csv_lines = (out1 / "deer.csv").read_text().splitlines()
    assert csv_lines[0] == "tau_s,signal"


def test_cli_implant_matches_oracle(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"implant": {"n_ions": 20000}}))
    assert main(["implant", "--config", str(cfg), "--seed", "6",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    payload = json.loads((tmp_path / "implant.json").read_text())
    assert payload["pair_fraction"] == pytest.approx(
        payload["rayleigh_oracle"], abs=3e-3)


def test_cli_threads_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NVPAIR_THREADS", "not-a-number")
    code = main(["swap", "--out", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["code"] == "config_invalid"
    monkeypatch.setenv("NVPAIR_THREADS", "2")
    assert main(["swap", "--out", str(tmp_path), "--trajectories",
                 "20000"]) == 0
    payload = json.loads((tmp_path / "swap.json").read_text())
    assert payload["round_trip_efficiency"] == pytest.approx(1.0, abs=1e-9)
