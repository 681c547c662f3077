import csv
import io
import json

import pytest

from tepgrid import report as rp
from tepgrid.cli import EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VIOLATIONS, dispatch
from tepgrid.network import BUNDLED_NETWORK


def run(*argv):
    buf = io.StringIO()
    code = dispatch(list(argv), stdout=buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def network_doc():
    from importlib import resources
    return json.loads(resources.files("tepgrid.data").joinpath(BUNDLED_NETWORK).read_text())


def test_solve_peak_table():
    code, out = run("solve", "--scenario", "peak")
    assert code == EXIT_OK
    header = out.splitlines()[1]
    for col in ("Bus", "Type", "V p.u.", "δ (deg.)", "P_g (MW)", "Q_g (Mvar)"):
        assert col in header
    assert "Top loadings" in out or "loading" in out.lower()


def test_n1_csv_rows_and_status():
    code, out = run("n1", "--scenario", "peak", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 24
    assert rows[0]["scenario"] == "peak"
    assert rows[0]["Line outage"] == "1-2 (1 line)"
    # high-voltage rows above 1.05 flag the sweep
    assert code == EXIT_VIOLATIONS


def test_n1_screening_profile_passes():
    code, _ = run("n1", "--scenario", "peak", "--no-v-max")
    assert code == EXIT_OK


def test_usage_errors(tmp_path, capsys):
    assert run("solve", "--bogus")[0] == EXIT_USAGE
    assert run("solve", "--network", str(tmp_path / "missing.json"))[0] == EXIT_USAGE
    assert run("solve", "--scenario", "winter")[0] == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("validate", "--network", str(bad))[0] == EXIT_USAGE
    assert "tepgrid" in capsys.readouterr().err


def test_solver_failure_exit(tmp_path, network_doc):
    doc = json.loads(json.dumps(network_doc))
    doc["loads"][0]["p_peak_mw"] = 60000
    doc["loads"][0]["q_peak_mvar"] = 29000
    path = tmp_path / "heavy.json"
    path.write_text(json.dumps(doc))
    code, out = run("solve", "--network", str(path), "--format", "json")
    assert code == EXIT_SOLVER
    assert json.loads(out)["payload"]["scenarios"][0]["converged"] is False


def test_validate_bundled():
    code, out = run("validate", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["payload"]["ok"] is True


def test_json_round_trip():
    code, out = run("solve", "--scenario", "all", "--format", "json")
    doc = rp.ReportDocument.from_json(out)
    assert rp.render(doc, "json") == out
    assert [s["scenario"] for s in doc.payload["scenarios"]] == ["peak", "dominant", "light"]
    assert doc.input_digest.startswith("sha256:")


def test_repeat_runs_identical():
    assert run("solve", "--format", "json")[1] == run("solve", "--format", "json")[1]
    assert run("lineparams", "--format", "csv")[1] == run("lineparams", "--format", "csv")[1]


def test_timestamp_is_opt_in():
    assert "generated_at" not in json.loads(run("cost", "--format", "json")[1])
    assert "generated_at" in json.loads(run("cost", "--format", "json", "--timestamp")[1])


def test_out_file(tmp_path):
    target = tmp_path / "peak.json"
    code, out = run("solve", "--format", "json", "--out", str(target))
    assert code == EXIT_OK and out == ""
    assert json.loads(target.read_text())["command"] == "solve"


def test_lineparams_csv():
    code, out = run("lineparams", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "from,to,circuit,length_km,r,x,b,Z'_re,Z'_im,Y'_im,rating_mva"
    assert len(lines) == 1 + 36


def test_sweep_json_order():
    code, out = run("sweep", "--scenario", "light", "--format", "json")
    scen = json.loads(out)["payload"]["scenarios"]
    labels = [r["outage"] for r in scen[0]["n1"]["rows"]]
    assert labels[0] == "1-2 (1 line)" and labels[-1] == "15-17 (1 line)"
    assert len(labels) == 24


def test_cost_ranking():
    code, out = run("cost", "--format", "json")
    ranking = json.loads(out)["payload"]["ranking"]
    assert code == EXIT_OK
    assert [r["label"] for r in ranking][:5] == ["I", "II", "IV", "V", "III"]
    assert ranking[0]["line"] == pytest.approx(3561.134, abs=1e-3)


def test_cost_overrides():
    base = json.loads(run("cost", "--case", "VI", "--format", "json")[1])["payload"]["ranking"][0]
    code, out = run("cost", "--case", "VI", "--max-load", "260", "--format", "json")
    moved = json.loads(out)["payload"]["ranking"][0]
    assert code == EXIT_OK
    assert moved["total"] == pytest.approx(base["total"])
    assert moved["avg_per_mw"] == pytest.approx(base["avg_per_mw"] / 2)
    assert run("cost", "--case", "VI", "--max-load", "0")[0] == EXIT_USAGE


def test_tep_single_check_fails_overloaded():
    code, out = run("tep", "--case", "I", "--at", "1500", "--no-v-max", "--format", "json")
    assert code == EXIT_VIOLATIONS
    assert json.loads(out)["payload"]["feasibility"]["passed"] is False
