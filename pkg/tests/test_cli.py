import csv
import json
import math

import pytest

from geobound import cli, flow
from geobound.errors import CausticEncountered


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_bounds_product_row(capsys):
    code, doc, err = run(capsys, "bounds", "--metric", "h2xh2")
    r = doc["report"]
    assert code == 0
    assert r["bg_rate2"] == pytest.approx(3, abs=1e-9)
    assert r["new_rate2"] == pytest.approx(23 / 8, abs=1e-9)
    assert r["refined_rate2"] == pytest.approx(63 / 22, abs=1e-9)
    assert r["symmetric_rate2"] == pytest.approx(2, abs=1e-9)
    assert r["new_rate"] == pytest.approx(math.sqrt(23 / 8))
    hdr = doc["header"]["defaults"]
    assert hdr["t0"] == 1e-3 and hdr["dt"] == 1e-3
    assert {"t_burn", "t_end", "n"} <= set(hdr)
    assert doc["header"]["resolved"]["n"] == 64 * 16
    assert "bg_rate2" in err


def test_bounds_hyperbolic4(capsys):
    _, doc, _ = run(capsys, "bounds", "--metric", "hd", "--param", "d=4", "-q")
    assert doc["report"]["bg_rate2"] == pytest.approx(9, abs=1e-12)
    assert doc["report"]["new_rate2"] == pytest.approx(9, abs=1e-12)


def test_bounds_squashed(capsys):
    _, doc, _ = run(capsys, "bounds", "--metric", "squashed-h3", "--param", "c=2", "-q")
    r = doc["report"]
    c = 2.0
    closed = 2 * (c * (1 + c) - (c - 1) ** 2 * (math.sqrt(3 * c * c + 3 * c + 1) - 1) ** 2 / (18 * (c + 1) ** 2))
    assert r["refined_rate2"] < r["new_rate2"] < r["bg_rate2"]
    assert r["new_rate2"] == pytest.approx(closed, abs=1e-6)
    assert r["bg_rate2"] == pytest.approx(12, abs=1e-9)


def test_simulate_product(capsys):
    code, doc, _ = run(capsys, "simulate", "--metric", "h2xh2", "--direction", "diag", "--t-end", "50", "-q")
    assert code == 0
    a = doc["averages"]
    assert a["mean_theta_sq"] == pytest.approx(2, abs=1e-2)
    assert a["window_mean_theta_sq"] >= a["mean_theta_sq"]


def test_simulate_hyperbolic_csv(capsys, tmp_path):
    path = tmp_path / "s.csv"
    code, _, _ = run(capsys, "simulate", "--metric", "hd", "--param", "d=3", "--t-end", "20",
                     "--csv", str(path), "-q")
    assert code == 0
    rows = list(csv.DictReader(open(path)))
    assert len(rows) > 1000
    assert max(abs(float(r["sigma2"])) for r in rows) < 1e-10


def test_simulate_squashed_below_both_rates(capsys):
    _, doc, _ = run(capsys, "simulate", "--metric", "squashed-h3", "--param", "c=2", "--direction", "x",
                    "--t-end", "50", "-q")
    v = doc["averages"]["mean_theta_sq"]
    assert v <= 11.861 and v < 12


def test_verify_raychaudhuri(capsys):
    code, doc, _ = run(capsys, "verify", "--suite", "raychaudhuri", "--metric", "h2xh2", "-q")
    assert code == 0 and doc["pass"]
    s = doc["suites"]["raychaudhuri"]
    assert s["residual1_max"] < 1e-5 and s["residual2_max"] < 1e-5


def test_verify_traces(capsys):
    code, doc, _ = run(capsys, "verify", "--suite", "traces", "--trials", "10000", "--seed", "7", "-q")
    assert code == 0 and doc["pass"]


def test_verify_shuffle(capsys):
    code, doc, _ = run(capsys, "verify", "--suite", "shuffle", "--trials", "1000", "--seed", "7", "-q")
    assert code == 0 and doc["pass"]
    assert doc["suites"]["shuffle"]["ratio_margin_min"] >= -1e-10


def test_verify_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setitem(cli.SUITES, "traces", lambda cfg, rng: (False, {"why": "forced"}))
    code, doc, _ = run(capsys, "verify", "--suite", "traces", "-q")
    assert code == cli.EXIT_FAIL and not doc["pass"]


def test_simulate_caustic_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise CausticEncountered(1.25)
    monkeypatch.setattr(flow, "integrate_flow", boom)
    code, doc, _ = run(capsys, "simulate", "--metric", "hd", "-q")
    assert code == cli.EXIT_CAUSTIC
    assert doc["halted_at"] == 1.25


def test_shuffle_constants(capsys, tmp_path):
    path = tmp_path / "shuffle.csv"
    code, doc, _ = run(capsys, "shuffle", "--k1", "4", "--k2", "0", "--csv", str(path), "-q")
    assert code == 0
    errs = [row["error"] for row in doc["convergence"]]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # second order in delta; see test_jacobi for the reason
    assert doc["loglog_slope"] == pytest.approx(2.0, abs=0.1)
    rows = list(csv.DictReader(open(path)))
    assert set(rows[0]) == {"t", "j1", "j2", "j_av", "j_shuffled", "product_margin"}
    assert min(float(r["product_margin"]) for r in rows) >= -1e-12


def test_shuffle_equal_schedules_zero_error(capsys):
    _, doc, _ = run(capsys, "shuffle", "--k1", "1.5", "--k2", "1.5", "--deltas", "0.1", "0.01", "-q")
    # the two grids differ only in floating-point placement of the nodes
    assert all(row["error"] <= 1e-13 * doc["j_av_end"] for row in doc["convergence"])


def test_shuffle_stick_event_logged(capsys):
    code, doc, err = run(capsys, "shuffle", "--k1", "-1", "--k2", "-1", "--t-end", "4", "--deltas", "0.1")
    assert code == 0
    assert doc["stuck_at"]["j_av"] == pytest.approx(math.pi, abs=1e-6)
    assert "stuck" in err


def test_list_metrics(capsys):
    code, doc, _ = run(capsys, "list-metrics", "-q")
    assert code == 0 and "h2xh2" in {m["name"] for m in doc["metrics"]}


@pytest.mark.parametrize("argv", [
    ["bounds", "--metric", "nope"],
    ["bounds", "--metric", "squashed-h3", "--param", "c=0.5"],
    ["bounds", "--param", "c"],
    ["simulate", "--dt", "-1"],
    ["simulate", "--metric", "hd", "--t-end", "0.0001"],
])
def test_config_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_CONFIG
    assert err.startswith("error")


def test_config_file_overrides_flags(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"metric": "hd", "params": {"d": 4}, "n": 300}))
    _, doc, _ = run(capsys, "bounds", "--metric", "h2xh2", "--config", str(cfg), "-q")
    assert doc["header"]["metric"] == "hd"
    assert doc["header"]["resolved"]["n"] == 300


def test_bad_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2")
    code, _, _ = run(capsys, "bounds", "--config", str(cfg))
    assert code == cli.EXIT_CONFIG


def test_deterministic_without_timestamp(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.json"
        cli.main(["verify", "--suite", "traces", "--trials", "200", "--seed", "3", "--no-timestamp",
                  "-q", "--output", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"timestamp" not in outs[0]
    cli.main(["list-metrics", "-q"])
    assert "timestamp" in capsys.readouterr().out
