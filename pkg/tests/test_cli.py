import csv
import io
import json
import math

import pytest

from markovpred.cli import COMMANDS, auto_mode, gap_reference, main, rate_reference

SMALL = {
    "risk-scan": ["-p", "n=[6,40]", "-p", 'predictors=["cesaro:variant=tail"]'],
    "redundancy-audit": ["-p", "n_max=20", "-p", "exact_cases=[[2,1,6]]"],
    "gap-risk": ["-p", "n=8", "-p", "points=2"],
    "lowerbound-demo": ["-p", "n=[32,64]", "-p", "class_n=[10]"],
    "spectral-report": [],
    "concentration-check": ["-p", "tail_trials=2000", "-p", "audit_count=200", "-p", "moment_n=100"],
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("cmd", sorted(COMMANDS))
def test_deterministic_bytes(cmd, tmp_path, capsys):
    paths = [tmp_path / f"a{i}" for i in range(2)]
    for p in paths:
        trials = "6000" if cmd == "concentration-check" else "50"
        code, _, err = run(capsys, "--seed", "5", "--trials", trials, "--deterministic", "--out", str(p), cmd,
                           *SMALL[cmd])
        assert code == 0, err
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    assert b"generated" not in a
    assert b'"seed":5' in a.replace(b" ", b"")


def test_deterministic_requires_seed(capsys):
    code, _, err = run(capsys, "--deterministic", "spectral-report")
    assert code == 2 and "seed" in err


def test_timestamp_without_deterministic(capsys):
    code, out, _ = run(capsys, "--format", "csv", "spectral-report")
    assert code == 0 and out.startswith("# generated: ")


def test_risk_scan_columns(capsys):
    code, out, _ = run(capsys, "--seed", "1", "--trials", "40", "--deterministic", "risk-scan", *SMALL["risk-scan"])
    rows = list(csv.DictReader(line for line in io.StringIO(out) if not line.startswith("#")))
    assert [r["mode"] for r in rows] == ["exact", "mc"]
    for r in rows:
        k, n = int(r["k"]), int(r["n"])
        assert float(r["reference"]) == rate_reference(k, n) == k * k / n * math.log(n / (k * k))
    assert rows[1]["trials"] == "40"


def test_auto_mode_rule():
    assert auto_mode(3, 14, "auto") == "exact"   # 3^14 < 1e7
    assert auto_mode(3, 15, "auto") == "mc"
    assert auto_mode(10, 7, "auto") == "exact"
    assert auto_mode(2, 30, "exact") == "exact"


def test_gap_reference():
    assert gap_reference(20, math.exp(-100)) == pytest.approx(max(1, math.log(math.log(20))) / 20)
    assert gap_reference(20, 0.5) == pytest.approx(1 / 20)


def test_redundancy_audit_json(capsys):
    code, out, _ = run(capsys, "--seed", "2", "--trials", "30", "--deterministic", "redundancy-audit",
                       *SMALL["redundancy-audit"])
    doc = json.loads(out)
    assert doc["summary"]["violations"] == 0
    assert doc["summary"]["pointwise_trials"] == 30 * len(doc["config"]["orders"])
    assert all(r["lhs"] <= r["bound"] for r in doc["rows"])


def test_gap_risk_hybrid_on_worst_chain(capsys):
    code, out, _ = run(capsys, "--seed", "0", "--deterministic", "gap-risk", "-p", "n=14",
                       "-p", "gamma0=[1e-40]", "-p", "points=3", "-p", "returns=[0.05,0.3]")
    rows = list(csv.DictReader(line for line in io.StringIO(out) if not line.startswith("#")))
    assert rows and all(r["mode"] == "exact" for r in rows)
    risk = {}
    for r in rows:
        kind = "hybrid" if r["predictor"].startswith("hybrid") else r["predictor"]
        risk.setdefault((r["a"], r["b"]), {})[kind] = float(r["mean_nats"])
    worst = max(risk.values(), key=lambda v: v["add_c:c=1"])
    assert worst["hybrid"] <= worst["add_c:c=1"]
    assert all(float(r["reference"]) == gap_reference(14, 1e-40) for r in rows)


def test_lowerbound_echo(capsys):
    code, out, _ = run(capsys, "--seed", "0", "--deterministic", "lowerbound-demo", *SMALL["lowerbound-demo"])
    rows = list(csv.DictReader(line for line in io.StringIO(out) if not line.startswith("#")))
    risk_rows = [r for r in rows if r["table"] == "three_state_bayes_risk"]
    assert [int(r["n"]) for r in risk_rows] == [32, 64]
    assert any(r["table"] == "second_order_bayes" for r in rows)


def test_spectral_report_matrix_file(tmp_path, capsys):
    from markovpred.chains import write_matrix_file
    from markovpred.constructions import three_state

    path = tmp_path / "m.txt"
    write_matrix_file(path, three_state(0.2, 10))
    code, out, _ = run(capsys, "--seed", "0", "--deterministic", "spectral-report", "-p", f'matrices=["{path}"]',
                       "-p", 'families=["two_state:a=0.2,b=0.3"]')
    doc = json.loads(out)
    assert doc["rows"][1]["gamma_star"] == pytest.approx(0.3)
    assert doc["rows"][0]["gamma_star"] == pytest.approx(0.5)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 9\ntrials = 30\n[risk-scan]\nn = [5]\npredictors = ["add_c:c=1"]\n')
    code, out, _ = run(capsys, "--config", str(cfg), "--deterministic", "risk-scan", "-p", "n=[6]")
    assert code == 0
    head = json.loads(out.splitlines()[0][len("# config: "):])
    assert head["seed"] == 9 and head["n"] == [6] and head["trials"] == 30


def test_bad_params(tmp_path, capsys):
    assert run(capsys, "risk-scan", "-p", "bogus=1")[0] == 2
    assert run(capsys, "risk-scan", "-p", "n=[]")[0] == 2
    assert run(capsys, "--trials", "1", "risk-scan")[0] == 2
