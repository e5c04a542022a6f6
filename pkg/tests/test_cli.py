import csv
import json
import subprocess
import sys

import pytest

from roughbm.cli import derive_seed, main, run
from roughbm.config import ConfigError, parse_config, validate
from roughbm.limits import characteristics
from roughbm.gaussian import make_model
from roughbm.hermite import monomial

IID = {"model": {"components": [{"taps": [1.0]}]}, "nonlinearity": {"kind": "hermite", "q": 1}}
LAGGED = {"model": {"components": [{"taps": [1.0, 0.0]}, {"taps": [0.6, 0.8]}]},
          "nonlinearity": {"kind": "hermite", "q": 1}, "M": 1, "U": 8,
          "experiment": {"reps": 50, "N": 32, "words": ["12", "21"], "windows": [[0, 1], [0.25, 0.75]]}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_filled(tmp_path):
    cfg = parse_config(write(tmp_path, IID))
    assert cfg.K == 4 and cfg.U == 4096 and cfg.experiment["reps"] == 10_000
    assert cfg.M == 1


def test_all_errors_reported():
    bad = dict(IID, nonlinearity={"kind": "hermite", "q": 3}, M=2, extra=1,
               experiment={"reps": 1, "windows": [[0.5, 0.2]], "bogus": 0})
    with pytest.raises(ConfigError) as e:
        validate(bad)
    errs = e.value.errors
    assert "config.extra: unknown key" in errs
    assert "config.experiment.bogus: unknown key" in errs
    assert any("component 0" in x and "config.M" in x for x in errs)
    assert any(x.startswith("config.experiment.reps") for x in errs)
    assert any(x.startswith("config.experiment.windows[0]") for x in errs)


def test_shape_mismatch_errors():
    cfg = dict(LAGGED, field={"kind": "bilinear", "V0": [[1, 0, 0], [0, 1, 0]]}, y0=[0, 0, 0])
    with pytest.raises(ConfigError) as e:
        validate(cfg)
    assert any("config.field.V0" in x for x in e.value.errors)
    assert any("config.y0" in x for x in e.value.errors)
    with pytest.raises(ConfigError):
        validate(dict(LAGGED, nonlinearity=[{"kind": "hermite", "q": 1}]))


def test_round_trip(tmp_path):
    cfg = dict(LAGGED, field={"kind": "bilinear", "V0": [[1, 0], [0, 1]],
                              "B": [[[0, 0], [0.5, 0]], [[-0.3, 0], [0, 0]]]}, y0=[0, 0])
    first = validate(cfg)
    p = tmp_path / "again.json"
    p.write_text(first.to_json())
    second = parse_config(p)
    assert second.to_dict() == first.to_dict()
    assert second.to_json() == first.to_json()


def test_ladder_iid_exact_half(tmp_path):
    code = run("verify", IID, {"out": str(tmp_path), "verify": "ladder", "n": 1})
    assert code == 0
    rows = read_csv(tmp_path / "verify_ladder.csv")
    assert rows[0] == ["label", "grid", "statistic", "stderr", "target"]
    assert abs(float(rows[-1][2]) - 0.5) <= 1e-12
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "ok"


def test_fawcett_antisymmetric_part(tmp_path):
    code = run("fawcett", LAGGED, {"out": str(tmp_path), "words": ["12", "21"]})
    assert code == 0
    rows = read_csv(tmp_path / "fawcett.csv")
    assert rows[0] == ["word", "s", "t", "value"]
    val = {(r[0], float(r[1]), float(r[2])): float(r[3]) for r in rows[1:]}
    ch = characteristics(monomial(1), make_model([[1, 0], [0.6, 0.8]]), 1, 8)
    for s, t in [(0, 1), (0.25, 0.75)]:
        diff = val[("12", s, t)] - val[("21", s, t)]
        assert diff == pytest.approx(2 * ch.Area[0, 1] * (t - s), rel=1e-12)
    assert ch.Area[0, 1] != 0


@pytest.mark.parametrize("cmd", ["lift", "variation", "covariance", "hermite"])
def test_byte_identical_reruns(tmp_path, cmd):
    cfg = dict(LAGGED, experiment=dict(LAGGED["experiment"], reps=8))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cmd, cfg, {"out": str(a), "seed": 7}) == 0
    assert run(cmd, cfg, {"out": str(b), "seed": 7}) == 0
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()
        assert b"\r" not in f.read_bytes()
    c = tmp_path / "c"
    run(cmd, cfg, {"out": str(c), "seed": 8})
    if cmd in ("lift", "variation"):
        assert (a / f"{cmd}.csv").read_bytes() != (c / f"{cmd}.csv").read_bytes()


def test_lift_columns(tmp_path):
    cfg = dict(LAGGED, experiment=dict(LAGGED["experiment"], reps=3))
    run("lift", cfg, {"out": str(tmp_path)})
    rows = read_csv(tmp_path / "lift.csv")
    assert rows[0][:3] == ["seed", "rep", "window"]
    assert len(rows[0]) == 3 + 2 + 4 + 4
    assert len(rows) == 1 + 3 * 2
    assert {r[0] for r in rows[1:]} == {str(derive_seed(0, "lift"))}


def test_diagrams_table(tmp_path):
    cfg = dict(IID, experiment={"q": [2, 2]})
    assert run("diagrams", cfg, {"out": str(tmp_path)}) == 0
    rows = read_csv(tmp_path / "diagrams.csv")
    assert rows == [["levels", "total_degree", "diagrams", "regular", "irregular"], ["2 2", "4", "2", "2", "0"]]


def test_budget_refusal_exit_code(tmp_path):
    cfg = dict(LAGGED, experiment={"N_grid": [16, 32]})
    code = run("verify", cfg, {"out": str(tmp_path), "verify": "blocks", "budget": 10})
    assert code == 2
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "refused" and report["cost_estimate"] > 10


def test_failing_verdict_exit_code(tmp_path):
    # d(r - 1/2) = -1.6 is the convergent regime, so the divergence check fails
    cfg = dict(IID, experiment={"r": 0.1, "d": 4, "L_grid": [1000, 10000]})
    assert run("verify", cfg, {"out": str(tmp_path), "verify": "counterexample"}) == 1


def test_main_entry_point(tmp_path):
    p = write(tmp_path, IID)
    out = tmp_path / "o"
    assert main(["--config", str(p), "--out", str(out), "verify", "ladder", "--n", "1"]) == 0
    assert (out / "verify_ladder.csv").exists()
    bad = write(tmp_path, dict(IID, oops=1), "bad.json")
    assert main(["--config", str(bad), "hermite"]) == 1
    proc = subprocess.run([sys.executable, "-m", "roughbm", "--config", str(p), "--out", str(out), "hermite"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS" in proc.stdout


def test_derive_seed_stable():
    assert derive_seed(5, "lift") == derive_seed(5, "lift")
    assert derive_seed(5, "lift") != derive_seed(5, "variation")
    assert derive_seed(0, "lift") ^ derive_seed(1, "lift") == 1
