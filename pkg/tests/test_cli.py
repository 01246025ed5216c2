import json

import pytest

from conecert import certio
from conecert.cli import UsageError, main, parse_config, parse_tau
from conecert.dynamics import SkewProductMap
from conecert.transversality import Status, certify


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr().out
    return code, out


# -- parsing --------------------------------------------------------------


def test_parse_paper_map():
    cfg = parse_config(["verify", "--m", "2", "--tau", "sin:1:1.0"])
    assert cfg.fmap == SkewProductMap.paper(1.0)
    assert cfg.cone == "auto"


def test_zero_tau_accepted():
    tau = parse_tau("sin:1:0")
    assert tau.is_zero


@pytest.mark.parametrize("bad", ["sin:0:1", "tan:1:1", "sin:1", "sin:x:1", "sin:1:1,sin:1:2"])
def test_malformed_tau(bad):
    with pytest.raises(UsageError):
        parse_tau(bad)


def test_sin_and_cos_share_frequency():
    tau = parse_tau("sin:1:0.5,cos:1:0.25,cos:3:1")
    assert [(h.freq, h.cos, h.sin) for h in tau.harmonics] == [(1, 0.25, 0.5), (3, 1.0, 0.0)]


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--m", "1"],
        ["verify", "--tau", "sin:0:1"],
        ["verify", "--bogus"],
        ["verify", "--n", "0"],
        ["verify", "--cone", "wide"],
        ["verify", "--cone", "1.0"],
        ["min-order", "--n-max", "21"],
        ["paper-pair", "--n", "3"],
        ["check"],
        ["coverage", "--box", "0.5,0.4,0,1"],
        [],
    ],
)
def test_usage_errors_exit_3(argv, capsys):
    assert main(argv) == 3


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"m": 2, "tau": "sin:1:0.5", "n": 6, "cone": "auto"}))
    c = parse_config(["verify", "--config", str(cfg)])
    assert c.fmap == SkewProductMap.paper(0.5) and c.n == 6
    c = parse_config(["verify", "--config", str(cfg), "--n", "3"])
    assert c.n == 3
    cfg.write_text(json.dumps({"tau": "sin:1:1", "colour": "red"}))
    assert main(["verify", "--config", str(cfg)]) == 3


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CONECERT_THREADS", "3")
    assert parse_config(["verify"]).workers == 3
    monkeypatch.setenv("CONECERT_THREADS", "0")
    with pytest.raises(UsageError):
        parse_config(["verify"])


# -- subcommands and exit codes --------------------------------------------


def test_verify_certified(tmp_path, capsys):
    out = tmp_path / "c.json"
    code, text = run(capsys, "verify", "--m", "2", "--tau", "sin:1:1", "--n", "6", "--cone", "auto", "--out", str(out))
    assert code == 0
    assert json.loads(text)["status"] == "CERTIFIED"
    doc = json.loads(out.read_text())
    assert doc["status"] == "CERTIFIED" and doc["n"] == 6
    assert set(doc) >= {"map", "cone_half_width", "n", "threshold", "status", "leaves", "stats"}
    assert set(doc["stats"]) == {"leaf_count", "max_depth", "wall_ms"}
    assert doc["map"] == {"m": 2, "tau": [{"freq": 1, "cos": 0, "sin": 1}]}


def test_verify_failed_with_refutation(capsys):
    code, text = run(capsys, "verify", "--m", "2", "--tau", "sin:1:1", "--n", "1", "--cone", "auto")
    assert code == 1
    doc = json.loads(text)
    assert doc["status"] == "FAILED" and "refutation" in doc


def test_verify_undecided(capsys):
    code, text = run(capsys, "verify", "--n", "3", "--max-depth", "1", "--no-refute")
    assert code == 2


def test_min_order(capsys):
    code, text = run(capsys, "min-order", "--n-max", "4")
    doc = json.loads(text)
    assert code == 0
    assert doc["orders"]["1"] == "FAILED" and doc["minimal_certified"] == 3


def test_min_order_all_failed(capsys):
    code, _ = run(capsys, "min-order", "--tau", "sin:1:0", "--n-max", "3")
    assert code == 1


def test_paper_pair_cmd(capsys):
    code, text = run(capsys, "paper-pair", "--n", "6")
    doc = json.loads(text)
    assert code == 0
    assert 0.28 <= doc["infimum"][0] <= doc["infimum"][1] <= 0.33


def test_admissibility_cmd(capsys):
    code, text = run(capsys, "admissibility", "--tau", "sin:1:0.5")
    assert code == 0
    doc = json.loads(text)
    assert doc["cone_half_width"] == pytest.approx(2 * 3.141592653589793, rel=1e-9)


def test_dump_hn(tmp_path, capsys):
    path = tmp_path / "h.csv"
    assert main(["dump-hn", "--n", "6", "--grid", "1024", "--out", str(path)]) == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "x,h_n"
    assert len(lines) == 1 + 1025
    x, v = lines[1].split(",")
    assert float(x) == 0.0 and float(v) == 1.96875


def test_coverage_cmd(capsys):
    code, text = run(capsys, "coverage", "--tau", "sin:1:0.5", "--grid", "16", "--samples", "2000", "--iterations", "10")
    assert code == 0
    assert len(json.loads(text)["covered_fraction"]) == 11


def test_birkhoff_cmd(capsys):
    code, text = run(capsys, "birkhoff", "--tau", "sin:1:0.5", "--start", "0,0", "--steps", "1000")
    assert code == 0
    assert json.loads(text)["final_average"] == 1.0


# -- certificate round trip -------------------------------------------------


def test_round_trip_and_check(tmp_path, capsys):
    cert = certify(SkewProductMap.paper(1.0), "auto", 3)
    path = tmp_path / "c3.json"
    certio.emit_certificate(cert, path)
    doc = certio.load_certificate(path)
    assert [lf["x_lo"] for lf in doc["leaves"]] == [lf.x_lo for lf in cert.leaves]
    assert [lf["margin"] for lf in doc["leaves"]] == [lf.margin for lf in cert.leaves]
    assert doc["threshold"] == cert.threshold
    res = certio.check(doc)
    assert res.ok and res.status == "CERTIFIED"
    assert main(["check", str(path)]) == 0


def _tamper(tmp_path, mutate):
    cert = certify(SkewProductMap.paper(1.0), "auto", 6)
    doc = certio.certificate_to_dict(cert)
    mutate(doc)
    path = tmp_path / "t.json"
    path.write_text(certio.format_json(doc))
    return path


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["leaves"][0].__setitem__("margin", -1.0),
        lambda d: d["leaves"][0].__setitem__("margin", 1e6),
        lambda d: d["leaves"][1].__setitem__("x_lo", 0.4),
        lambda d: d["leaves"].pop(),
        lambda d: d["leaves"][0].__setitem__("pair", [0, 1]),
        lambda d: d["leaves"][0].__setitem__("pair", [0, 64]),
        lambda d: d.__setitem__("threshold", 0.1),
        lambda d: d.__setitem__("cone_half_width", 1.0),
        lambda d: d.__setitem__("status", "FAILED"),
    ],
)
def test_tampered_certificate_rejected(tmp_path, capsys, mutate):
    path = _tamper(tmp_path, mutate)
    res = certio.check_file(path)
    assert not res.ok
    assert main(["check", str(path)]) == 1


def test_failed_certificate_checks(tmp_path, capsys):
    cert = certify(SkewProductMap.paper(1.0), "auto", 2)
    assert cert.status is Status.FAILED
    path = tmp_path / "f.json"
    certio.emit_certificate(cert, path)
    assert certio.check_file(path).ok
    assert main(["check", str(path)]) == 1


def test_format_json_seventeen_digits():
    text = certio.format_json({"a": 0.1, "b": [1, 2.5], "c": None, "d": "x"})
    assert "0.10000000000000001" in text
    assert json.loads(text) == {"a": 0.1, "b": [1, 2.5], "c": None, "d": "x"}
