from __future__ import annotations

import csv
import hashlib
import json
import subprocess
import sys

import pytest

from windwave import cli
from windwave.laminar import lambda_zero
from windwave.verify import CriterionResult, desk_lidded, desk_unbounded, feasible_lidded


def write_cfg(path, cfg, **numerics):
    d = cfg.to_dict()
    if numerics:
        d["numerics"] = numerics
    path.write_text(json.dumps(d))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def lidded_cfg(tmp_path):
    return write_cfg(tmp_path / "lidded.json", feasible_lidded())


def test_laminar_q_peaks_at_lambda_zero(tmp_path, lidded_cfg):
    l0 = lambda_zero(feasible_lidded())
    lams = ",".join(repr(x) for x in (0.5 * l0, 0.8 * l0, l0, 1.2 * l0, 2 * l0))
    assert cli.main(["laminar", "--config", lidded_cfg, "--out", str(tmp_path / "o"), "--lambdas", lams]) == 0
    rows = read_csv(tmp_path / "o" / "laminar.csv")
    assert rows[0] == ["lambda", "Q", "depth", "width"]
    Q = [float(r[1]) for r in rows[1:]]
    assert Q.index(max(Q)) == 2


def test_laminar_grid_from_numerics(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", desk_unbounded(), lambda_grid={"start": 0.5, "stop": 1.5, "num": 3})
    assert cli.main(["laminar", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "laminar.csv")
    assert [r[0] for r in rows[1:]] == ["0.5", "1", "1.5"]
    assert rows[2][3] == ""  # no width without a lid


def test_empty_grid_is_bad_input(tmp_path, lidded_cfg):
    assert cli.main(["laminar", "--config", lidded_cfg, "--out", str(tmp_path / "o"), "--lambdas", ","]) == 4


def test_determinism(tmp_path, lidded_cfg):
    for _ in range(2):
        assert cli.main(["laminar", "--config", lidded_cfg, "--out", str(tmp_path / "o"), "--lambdas", "0.3:2:7"]) == 0
        snap = {p: (tmp_path / "o" / p).read_bytes() for p in ("laminar.csv", "manifest.json", "outputs.json")}
        if _ == 0:
            first = snap
    assert snap == first


def test_csv_format(tmp_path, lidded_cfg):
    cli.main(["laminar", "--config", lidded_cfg, "--out", str(tmp_path / "o"), "--lambdas", "0.7"])
    raw = (tmp_path / "o" / "laminar.csv").read_bytes()
    assert raw.count(b"\r\n") == 2
    depth = read_csv(tmp_path / "o" / "laminar.csv")[1][2]
    assert float(depth) == 1.0 / 0.7 and depth == format(1.0 / 0.7, ".17g")


def test_manifest(tmp_path, lidded_cfg):
    out = tmp_path / "o"
    cli.main(["laminar", "--config", lidded_cfg, "--out", str(out), "--lambdas", "0.7", "--seed", "5"])
    m = json.loads((out / "manifest.json").read_text())
    assert m["subcommand"] == "laminar" and m["seed"] == 5 and m["parameters"]["lambdas"] == [0.7]
    assert m["config_sha256"] == hashlib.sha256(open(lidded_cfg, "rb").read()).hexdigest()
    idx = json.loads((out / "outputs.json").read_text())
    assert idx["manifest_sha256"] == hashlib.sha256((out / "manifest.json").read_bytes()).hexdigest()
    assert idx["files"]["laminar.csv"] == hashlib.sha256((out / "laminar.csv").read_bytes()).hexdigest()


def test_bifurcate_unbounded(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", desk_unbounded())
    assert cli.main(["bifurcate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "bifurcation.json").read_text())
    assert doc["lambda_star"] == pytest.approx(0.55950, abs=1e-5)
    assert doc["condition_report"]["ULBC"]["passed"] is True


def test_bifurcate_shear_zero_matches_ideal(tmp_path):
    a = write_cfg(tmp_path / "a.json", desk_unbounded())
    b = write_cfg(tmp_path / "b.json", desk_unbounded(0.0))
    cli.main(["bifurcate", "--config", a, "--out", str(tmp_path / "oa")])
    cli.main(["bifurcate", "--config", b, "--out", str(tmp_path / "ob")])
    la = json.loads((tmp_path / "oa" / "bifurcation.json").read_text())["lambda_star"]
    lb = json.loads((tmp_path / "ob" / "bifurcation.json").read_text())["lambda_star"]
    assert la == lb


def test_bifurcate_infeasible(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", desk_lidded())
    assert cli.main(["bifurcate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert err["error"] == "infeasible" and err["condition"] == "SIZE_1"
    assert json.loads((tmp_path / "o" / "bifurcation.json").read_text())["condition"] == "SIZE_1"


def test_branch(tmp_path, lidded_cfg):
    out = tmp_path / "o"
    assert cli.main(["branch", "--config", lidded_cfg, "--out", str(out), "--s-max", "0.002", "--steps", "2"]) == 0
    b = read_csv(out / "branch.csv")
    d = read_csv(out / "diagnostics.csv")
    assert b[0] == ["s", "Q", "depth", "eta_inf", "newton_iterations", "F_E_deviation"] and len(b) == 3
    assert d[0] == ["s", "F_E_mean", "F_E_spread", "drag", "bernoulli_resid", "kinematic_resid", "circ_err"]
    assert float(b[2][0]) == 0.002 and abs(float(b[2][3]) - 0.002) < 1e-4


def test_branch_on_unbounded_is_bad_input(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", desk_unbounded())
    assert cli.main(["branch", "--config", cfg, "--out", str(tmp_path / "o")]) == 4


def test_multiplier_table(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", desk_unbounded(0.5))
    out = tmp_path / "o"
    assert cli.main(["multiplier", "--config", cfg, "--out", str(out), "--k-max", "3", "--fd-k-max", "0",
                     "--lambdas", "0.5,1.0"]) == 0
    rows = read_csv(out / "multiplier.csv")
    assert len(rows) == 7 and rows[0][:5] == ["k", "lambda", "m", "m_tilde", "interface_symbol"]
    k, lam, m, mt = int(rows[1][0]), float(rows[1][1]), float(rows[1][2]), float(rows[1][3])
    assert (k, lam) == (1, 0.5) and mt == pytest.approx(m - 0.25)
    assert rows[1][5] == ""


def test_verify_exit_codes(tmp_path, monkeypatch):
    from windwave import verify

    def fake(passed):
        def run_all(seed=None, echo=print):
            r = CriterionResult("1", "stub", passed, "stub", 0.0)
            echo(r.line())
            return [r]
        return run_all

    stub = CriterionResult("x", "stub", True, "", 0.0)
    monkeypatch.setattr(verify, "criterion_2", lambda cfg=None: stub)
    monkeypatch.setattr(verify, "companion_8", lambda: stub)
    monkeypatch.setattr(verify, "run_all", fake(True))
    assert cli.main(["verify", "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setattr(verify, "run_all", fake(False))
    assert cli.main(["verify", "--out", str(tmp_path / "b")]) == 1
    assert "[FAIL] criterion 1" in (tmp_path / "b" / "verify.txt").read_text()


@pytest.mark.parametrize("content", [None, "{not json", json.dumps({"regime": "lidded_irrotational", "g": 1.0})])
def test_bad_configs(tmp_path, content):
    path = tmp_path / "c.json"
    if content is not None:
        path.write_text(content)
    assert cli.main(["laminar", "--config", str(path), "--out", str(tmp_path / "o"), "--lambdas", "1"]) == 4


def test_usage_error_is_bad_input(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == 4


def test_missing_config(tmp_path):
    assert cli.main(["laminar", "--out", str(tmp_path / "o")]) == 4


def test_parse_lambdas():
    assert list(cli.parse_lambdas("0:1:3")) == [0.0, 0.5, 1.0]
    assert list(cli.parse_lambdas([1, 2])) == [1.0, 2.0]
    with pytest.raises(cli.BadInputError):
        cli.parse_lambdas("a,b")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "windwave", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("windwave ")
