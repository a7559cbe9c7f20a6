import csv
import json

import pytest

from csekit import cli
from csekit.config import ConfigError, load_config

BASE = {
    "family": {"name": "normal", "dim": 1},
    "design": {"name": "ztest", "params": {"lam": 0.025}},
    "grid": {"lower": [-1.0], "upper": [0.0], "counts": [8]},
    "hypotheses": [{"axis": 0, "threshold": 0.0, "direction": "<="}],
    "sim_count": 3000,
    "master_seed": 11,
}


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        rows = list(csv.DictReader(fh))
    return json.loads(first.split(": ", 1)[1]), rows


@pytest.mark.parametrize("command,key,value", [("validate", "delta", 0.05), ("calibrate", "alpha", 0.025)])
def test_outputs_identical_across_threads(tmp_path, command, key, value):
    cfg = _write(tmp_path, "c.json", {**BASE, key: value, "sim_count": 40_000})
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        assert cli.run([command, "--config", cfg, "--out", str(out), "--threads", str(threads)]) == 0
        outs.append(out)
    for f in sorted(p.name for p in outs[0].iterdir()):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_validate_artifacts_and_provenance(tmp_path):
    cfg = _write(tmp_path, "v.json", {**BASE, "delta": 0.05, "lower": True})
    assert cli.run(["validate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "validation.json").read_text())
    assert report["provenance"]["master_seed"] == 11
    assert report["provenance"]["config"]["grid"] == BASE["grid"]
    assert len(report["tiles"]) == 8 and "tile_lower" in report["tiles"][0]
    prov, rows = _read_csv(tmp_path / "o" / "validation.csv")
    assert prov["command"] == "validate" and len(rows) == 8
    assert float(rows[-1]["tile_upper"]) >= float(rows[-1]["cp_upper"])


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, "v.json", {**BASE, "delta": 0.05})
    assert cli.run(["validate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "99"]) == 0
    report = json.loads((tmp_path / "a" / "validation.json").read_text())
    assert report["provenance"]["master_seed"] == 99


def test_calibrate_adaptive_and_bootstrap(tmp_path):
    cfg = _write(
        tmp_path,
        "c.json",
        {**BASE, "alpha": 0.025, "adaptive": {"rounds": 2, "budget": 3, "sim_growth": 2.0},
         "bootstrap": {"B": 10}},
    )
    assert cli.run(["calibrate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    res = json.loads((tmp_path / "o" / "calibration.json").read_text())
    tiles = [h["tiles"] for h in res["adaptive_history"]]
    assert tiles == [8, 11, 14]
    assert res["adaptive_history"][-1]["total_sims"] > res["adaptive_history"][0]["total_sims"]
    assert set(res["bootstrap"]) == {"B", "mean_slack", "std_slack"}
    assert len(res["platten"]["tiles"]) == 14 == len(res["tiles"])
    assert cli.run(["calibrate", "--config", cfg, "--out", str(tmp_path / "p"), "--adaptive-rounds", "0"]) == 0
    res0 = json.loads((tmp_path / "p" / "calibration.json").read_text())
    assert len(res0["tiles"]) == 8


def test_bound_reproduces_reference_row(tmp_path):
    cfg = _write(
        tmp_path,
        "b.json",
        {"family": {"name": "normal"}, "master_seed": 0,
         "bound": {"theta0": -0.25, "a": 0.013553, "v_max": 0.3, "v_count": 31, "fixed_q": [8, 64]}},
    )
    assert cli.run(["bound", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = _read_csv(tmp_path / "bound.csv")
    row = next(r for r in rows if abs(float(r["v"]) - 0.25) < 1e-12)
    assert float(row["tilt_opt"]) == pytest.approx(0.0273, abs=5e-4)
    assert float(row["pinsker"]) == pytest.approx(0.1386, abs=1e-4)
    assert {"q_8", "q_64", "true_f", "taylor", "q_star"} <= set(row)
    # 17 significant digits survive the round trip
    assert len(row["pinsker"].replace(".", "").lstrip("0")) >= 15


def test_grid_and_confset(tmp_path):
    cfg_path = _write(
        tmp_path,
        "c.json",
        {**BASE, "design": {"name": "ztest", "params": {"recenter": True}},
         "grid": {"lower": [-1.0], "upper": [1.0], "counts": [8]}, "hypotheses": [],
         "alpha": 0.025, "sim_count": 999},
    )
    out = str(tmp_path / "o")
    assert cli.run(["grid", "--config", cfg_path, "--out", out]) == 0
    grid = json.loads((tmp_path / "o" / "platten.json").read_text())
    assert grid["stats"]["tiles"] == 8 and grid["stats"]["total_volume"] == pytest.approx(2.0)
    assert cli.run(["calibrate", "--config", cfg_path, "--out", out]) == 0
    obs = _write(tmp_path, "obs.json", {"values": [1.5]})
    args = ["confset", "--config", cfg_path, "--out", out,
            "--calibration", str(tmp_path / "o" / "calibration.json"), "--observed", obs]
    assert cli.run(args) == 0
    cs = json.loads((tmp_path / "o" / "confset.json").read_text())
    assert cs["image"][1] == pytest.approx(1.0) and cs["image"][0] > -1.0
    assert cs["calibration_provenance"]["command"] == "calibrate"
    assert cli.run(args[:-4]) == 2  # missing --calibration / --observed


@pytest.mark.parametrize(
    "mutate,pointer",
    [
        (lambda c: c.pop("master_seed"), "/"),
        (lambda c: c["design"].update(name="nope"), "/design/name"),
        (lambda c: c["family"].update(name="poisson"), "/family/name"),
        (lambda c: c.update(sim_count=0), "/sim_count"),
        (lambda c: c.update(alpha=0.05), "/alpha"),
        (lambda c: c.update(extra=1), "/"),
        (lambda c: c["grid"].update(lower=[0.5]), "/grid"),
        (lambda c: c.pop("delta"), "/delta"),
    ],
)
def test_config_errors_exit_2_with_pointer(tmp_path, caplog, mutate, pointer):
    cfg = json.loads(json.dumps({**BASE, "delta": 0.05}))
    mutate(cfg)
    path = _write(tmp_path, "bad.json", cfg)
    assert cli.run(["validate", "--config", path, "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError) as info:
        load_config(path, "validate").platten()
    assert info.value.path == pointer


def test_unreadable_config_exit_2(tmp_path):
    assert cli.run(["grid", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run(["grid", "--config", str(bad)]) == 2


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    def boom(*args):
        raise FloatingPointError("overflow")

    monkeypatch.setitem(cli.COMMANDS, "grid", boom)
    cfg = _write(tmp_path, "g.json", BASE)
    assert cli.run(["grid", "--config", cfg, "--out", str(tmp_path)]) == 3


def test_schema_command(capsys):
    assert cli.run(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "master_seed" in schema["required"]


def test_main_exits_with_status(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["grid", "--config", str(tmp_path / "none.json")])
    assert info.value.code == 2
