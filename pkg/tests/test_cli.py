import json

import pytest

from coopsense import fixtures as fx
from coopsense.cli import main


@pytest.fixture()
def inputs(tmp_path):
    assert main(["fixture-paper-example", "--write-inputs", str(tmp_path)]) == 0
    return tmp_path


def test_fixture_passes_and_perturbations_fail(capsys):
    assert main(["fixture-paper-example"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5 and all(l.startswith("[PASS]") for l in lines)
    assert main(["fixture-paper-example", "--set-pd", "1", "1", "0.5"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] characteristic function" in out and "v(1)=0.0000" in out
    assert main(["fixture-paper-example", "--tolerance", "0"]) == 1
    assert "[FAIL] one-point solutions" in capsys.readouterr().out
    assert main(["fixture-paper-example", "--no-gating"]) == 1


def test_game_solve_pipeline(inputs, capsys):
    game = inputs / "game.json"
    assert main(["game", str(inputs / "game_input.json"), "--out", str(game)]) == 0
    worth = json.loads(game.read_text())
    for mask, value in fx.WORTH.items():
        assert worth[str(mask)] == pytest.approx(value, abs=1e-3)
    sol = inputs / "sol.json"
    assert main(["solve", str(game), "--out", str(sol)]) == 0
    doc = json.loads(sol.read_text())
    assert doc["nucleolus"]["normalized"] == pytest.approx(fx.NUCLEOLUS_NORM.tolist(), abs=0.02)
    assert all(doc[k]["in_core"] for k in ("shapley", "tau", "nucleolus"))
    assert "Nucleolus" in capsys.readouterr().out


def test_auction_command(inputs, capsys):
    out = inputs / "trace.json"
    assert main(["auction", str(inputs / "auction_input.json"), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["balances"] == pytest.approx(fx.BALANCES.tolist(), abs=1e-3)
    assert [r["price"] for r in doc["rounds"]] == pytest.approx([22.3674, 6.9918], abs=1e-9)
    assert "Norm. balance" in capsys.readouterr().out


def test_roc_and_pdmap(tmp_path):
    assert main(["roc", "--snr", "-10", "--points", "9", "--out", str(tmp_path / "roc.csv")]) == 0
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "snr_db,p_fa,p_d" and len(lines) == 11
    assert main(["pdmap", "--out", str(tmp_path / "pd.csv")]) == 0
    lines = (tmp_path / "pd.csv").read_text().splitlines()
    assert lines[0] == "snr_db,p_d" and len(lines) == 42


def test_simulate_reproducible_from_manifest(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--model", "ispa", "--slots", "40", "--seed", "6", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("slots.csv", "scatter.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config"]["model"] == "ispa" and manifest["seed"] == 6
    assert sorted(p.name for p in a.iterdir()) == ["manifest.json", "scatter.csv", "slots.csv",
                                                   "summary.json"]


def test_compare(tmp_path, capsys):
    assert main(["compare", "--slots", "30", "--seed", "2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "comparison.json").read_text())
    assert set(doc["table"]) == {"CG-JSJA", "JSPA", "ISPA", "JSRR", "JSRM"}
    assert (tmp_path / "manifest.json").exists()


def test_properties_command(capsys):
    assert main(["properties", "--instances", "50", "--seed", "3"]) == 0
    assert "[PASS] super_additivity" in capsys.readouterr().out


def test_invalid_input_exit_code(tmp_path, capsys):
    assert main(["game", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"pd_matrix": [[0.2]]}))
    assert main(["game", str(bad)]) == 2
    assert main(["properties", "--instances", "0"]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_slots": 5, "warp": 1}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--model", "nope", "--out", "x"])
    assert exc.value.code == 2
