import csv
import json

import pytest

from cowqkd.cli import main
from cowqkd.experiments import CSV_HEADER


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_session_prints_json(capsys):
    code, out, _ = run(capsys, "session", "--variant", "2p", "--seed", "7", "--config", "default")
    assert code == 0
    doc = json.loads(out)
    assert doc["seed"] == 7 and doc["variant"] == "2p"


def test_encode_dumps_pattern(capsys):
    code, out, _ = run(capsys, "encode", "--pattern", "0,1,d")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["symbol"] for r in rows] == ["BIT0", "BIT0", "BIT1", "BIT1", "DECOY", "DECOY"]
    assert [float(r["power_w"]) > 0 for r in rows] == [False, True, True, False, True, True]


def test_encode_rejects_bad_symbol(capsys):
    code, _, err = run(capsys, "encode", "--pattern", "0,x")
    assert code == 1 and "unknown symbol" in err


def test_sweep_fiber_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_symbols": 500}))
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep-fiber", "--config", str(cfg), "--no-calibrate",
                     "--distances", "10,20", "--variant", "2p", "--out", str(out))
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert tuple(rows[0]) == CSV_HEADER and len(rows) == 3


def test_sweep_fso_weathers(capsys):
    code, out, _ = run(capsys, "sweep-fso", "--no-calibrate", "--distances", "1",
                       "--weathers", "VeryClear,HeavyFog", "--variant", "3p", "--seed", "2")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["weather"] for r in rows] == ["VeryClear", "HeavyFog"]
    assert float(rows[0]["snr_db"]) > float(rows[1]["snr_db"])


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"not_a_key": 1}))
    code, _, err = run(capsys, "session", "--config", str(cfg))
    assert code == 1 and "not_a_key" in err
    code, _, _ = run(capsys, "session", "--config", str(tmp_path / "missing.json"))
    assert code == 1


def test_usage_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["teleport"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["session", "--bogus"])
    assert exc.value.code == 2


def test_max_distance_ordering(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_symbols": 3000, "sweep": {"averaging_sessions": 3,
                                                             "tolerance_km": 2.0}}))
    results = {}
    for v in ("2p", "3p"):
        code, out, _ = run(capsys, "max-distance", "--variant", v, "--config", str(cfg))
        assert code == 0
        results[v] = json.loads(out)["distance_km"]
    assert results["3p"] < results["2p"]
    assert abs(results["2p"] - 120.0) <= 2.0


def test_max_distance_without_noise_fails(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_symbols": 200, "apd": {"noise_enabled": False}}))
    code, _, err = run(capsys, "max-distance", "--config", str(cfg), "--k", "1")
    assert code == 1 and "error" in err
