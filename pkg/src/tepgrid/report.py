"""Report documents and their text, JSON and CSV renderings.

A :class:`ReportDocument` carries a plain JSON-able payload. Text tables and
CSV are derived from the payload alone, so a document read back from JSON
renders exactly like the original.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from importlib import metadata
from typing import Any, Callable

import numpy as np

from .compliance import N1Result, ScenarioReport
from .lines import equivalent_pi
from .network import Network
from .powerflow import PowerFlowSolution, system_summary

FORMATS = ("table", "json", "csv")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def plain(obj: Any) -> Any:
    """Recursively convert to JSON-native types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    return obj


@dataclass(frozen=True)
class ReportDocument:
    command: str
    params: dict
    payload: dict
    input_digest: str = ""
    tool_version: str = field(default_factory=tool_version)
    generated_at: str | None = None

    def to_dict(self) -> dict:
        d = {
            "tool_version": self.tool_version,
            "input_digest": self.input_digest,
            "command": self.command,
            "params": plain(self.params),
            "payload": plain(self.payload),
        }
        if self.generated_at is not None:
            d["generated_at"] = self.generated_at
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        return cls(d["command"], d["params"], d["payload"], d.get("input_digest", ""),
                   d.get("tool_version", ""), d.get("generated_at"))

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------------ payloads

def solution_payload(sol: PowerFlowSolution) -> dict:
    summ = system_summary(sol)
    buses = []
    for k, b in enumerate(sol.bus_ids):
        buses.append({
            "bus": b, "kind": sol.kinds[k], "v_pu": sol.vm[k], "angle_deg": sol.va_deg[k],
            "p_gen_mw": sol.p_gen[k] if sol.has_gen[k] or sol.kinds[k] == "slack" else 0.0,
            "q_gen_mvar": sol.q_gen[k], "p_load_mw": sol.p_load[k], "q_load_mvar": sol.q_load[k],
            "q_shunt_mvar": sol.q_shunt[k],
        })
    circuits = [{
        "from": f.from_bus, "to": f.to_bus, "circuit": f.circuit,
        "p_from_mw": f.s_from_mva.real, "q_from_mvar": f.s_from_mva.imag,
        "p_to_mw": f.s_to_mva.real, "q_to_mvar": f.s_to_mva.imag,
        "loading_pct": f.loading_pct,
    } for f in sol.flows]
    return plain({
        "scenario": sol.scenario,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "message": sol.message,
        "switched_to_pq": list(sol.switched_to_pq),
        "losses_mw": sol.losses_mw,
        "losses_mvar": sol.losses_mvar,
        "total_gen_mw": summ.total_gen_mw,
        "total_load_mw": summ.total_load_mw,
        "top_loadings": [{"line": k, "loading_pct": v} for k, v in summ.top_loadings],
        "buses": buses,
        "circuits": circuits,
    })


def n1_payload(res: N1Result) -> dict:
    rows = [{
        "outage": r.outage, "converged": r.converged, "islanding": r.islanding,
        "lowest_v_pu": r.lowest_v, "lowest_v_bus": r.lowest_v_bus,
        "highest_loading_pct": r.highest_loading_pct, "highest_loading_line": r.highest_loading_line,
        "violations": [str(v) for v in r.violations], "ok": r.ok,
    } for r in res.rows]
    d = res.digest
    return plain({
        "scenario": res.scenario,
        "rows": rows,
        "digest": {
            "worst_v_pu": d.worst_v, "worst_v_bus": d.worst_v_bus, "worst_v_outage": d.worst_v_outage,
            "worst_loading_pct": d.worst_loading_pct, "worst_loading_line": d.worst_loading_line,
            "worst_loading_outage": d.worst_loading_outage, "n_rows": d.n_rows, "n_failed": d.n_failed,
        },
    })


def scenario_payload(rep: ScenarioReport) -> dict:
    return plain({
        "scenario": rep.scenario,
        "ok": rep.ok,
        "normal": solution_payload(rep.normal),
        "normal_violations": [str(v) for v in rep.normal_violations],
        "n1": n1_payload(rep.n1),
    })


def lineparams_payload(net: Network) -> dict:
    rows = []
    for g in net.circuit_groups:
        u = net.unit_params(g)
        pi = equivalent_pi(u, g.length_km, net.circuit_rating(g))
        for c in range(1, g.n_circuits + 1):
            rows.append({
                "from": g.from_bus, "to": g.to_bus, "circuit": c, "length_km": g.length_km,
                "r": u.r_ohm_per_km, "x": u.x_ohm_per_km, "b": u.b_siemens_per_km,
                "z_re": pi.z_series.real, "z_im": pi.z_series.imag, "y_im": pi.y_shunt_total.imag,
                "rating_mva": pi.rating_mva,
            })
    return plain({"rows": rows})


def cost_payload(c) -> dict:
    return plain({
        "label": c.label, "max_load_mw": c.max_load_mw, "delta_loss_mw": c.delta_loss_mw,
        "line": c.line, "bay": c.bay, "reactor": c.reactor, "loss_capital": c.loss_capital,
        "loss_fuel": c.loss_fuel, "loss_om": c.loss_om, "total": c.total, "avg_per_mw": c.avg_per_mw,
        "warnings": list(c.warnings),
    })


def tep_result_payload(r) -> dict:
    return plain({
        "label": r.label, "max_load_mw": r.max_load_mw, "peak_loss_mw": r.peak_loss_mw,
        "additional_reactor_mvar": r.additional_reactor_mvar, "anomaly": r.anomaly,
        "probes": [{"load_mw": mw, "passed": ok} for mw, ok in r.probes],
    })


def digest_rows(digests) -> list[dict]:
    return plain([{
        "scenario": key, "worst_v_pu": d.worst_v, "worst_v_bus": d.worst_v_bus,
        "worst_v_outage": d.worst_v_outage, "worst_loading_pct": d.worst_loading_pct,
        "worst_loading_line": d.worst_loading_line, "worst_loading_outage": d.worst_loading_outage,
    } for key, d in digests.items()])


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class Table:
    title: str
    columns: tuple[tuple[str, str, str], ...]  # (header, payload key, format spec)
    rows: tuple[dict, ...]


def _fmt(value, spec: str) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, list):
        return "; ".join(str(v) for v in value) or "-"
    if spec and isinstance(value, (int, float)):
        return format(value, spec)
    return str(value)


def _solve_tables(payload: dict) -> list[Table]:
    out = []
    for s in payload["scenarios"]:
        cols = (("Bus", "bus", ""), ("Type", "kind", ""), ("V p.u.", "v_pu", ".3f"),
                ("δ (deg.)", "angle_deg", ".2f"), ("P_g (MW)", "p_gen_mw", ".1f"),
                ("Q_g (Mvar)", "q_gen_mvar", ".1f"), ("P_L (MW)", "p_load_mw", ".1f"),
                ("Q_L (Mvar)", "q_load_mvar", ".1f"), ("Shunt (Mvar)", "q_shunt_mvar", ".1f"))
        status = "converged" if s["converged"] else f"NOT converged ({s['message']})"
        title = f"{s['scenario']}: {status} in {s['iterations']} iterations, losses {_fmt(s['losses_mw'], '.1f')} MW"
        out.append(Table(title, cols, tuple(s["buses"])))
        tops = tuple({"line": t["line"], "loading_pct": t["loading_pct"]} for t in s["top_loadings"])
        out.append(Table(f"{s['scenario']}: highest loadings", (("Line", "line", ""), ("% loading", "loading_pct", ".2f")), tops))
    return out


_N1_COLS = (("Line outage", "outage", ""), ("V p.u.", "lowest_v_pu", ".3f"), ("Bus#", "lowest_v_bus", ""),
            ("%loading", "highest_loading_pct", ".2f"), ("Line", "highest_loading_line", ""),
            ("Violations", "violations", ""))


def _n1_tables(payload: dict) -> list[Table]:
    return [Table(f"{s['scenario']}: single-circuit outages", _N1_COLS, tuple(s["rows"]))
            for s in payload["scenarios"]]


def _sweep_tables(payload: dict) -> list[Table]:
    rows = []
    for s in payload["scenarios"]:
        d = s["n1"]["digest"]
        rows.append({
            "scenario": s["scenario"], "ok": s["ok"], "losses": s["normal"]["losses_mw"],
            "normal_violations": len(s["normal_violations"]), "worst_v": d["worst_v_pu"],
            "worst_v_bus": d["worst_v_bus"], "worst_v_outage": d["worst_v_outage"],
            "worst_loading": d["worst_loading_pct"], "worst_loading_line": d["worst_loading_line"],
            "failed": d["n_failed"], "n_rows": d["n_rows"],
        })
    cols = (("Scenario", "scenario", ""), ("Compliant", "ok", ""), ("Losses (MW)", "losses", ".1f"),
            ("Normal viol.", "normal_violations", ""), ("Worst N-1 V", "worst_v", ".3f"),
            ("Bus#", "worst_v_bus", ""), ("Outage", "worst_v_outage", ""),
            ("Max %loading", "worst_loading", ".2f"), ("Line", "worst_loading_line", ""),
            ("Failed rows", "failed", ""), ("Rows", "n_rows", ""))
    return [Table("normal and N-1 summary", cols, tuple(rows))] + _n1_tables(
        {"scenarios": [s["n1"] for s in payload["scenarios"]]})


def _validate_tables(payload: dict) -> list[Table]:
    rows = tuple({"finding": f} for f in payload["findings"]) or ({"finding": "no findings"},)
    return [Table(f"validation of {payload['network']}", (("Finding", "finding", ""),), rows)]


def _lineparams_tables(payload: dict) -> list[Table]:
    cols = (("from", "from", ""), ("to", "to", ""), ("circuit", "circuit", ""), ("length_km", "length_km", ".2f"),
            ("r", "r", ".5f"), ("x", "x", ".5f"), ("b", "b", ".4e"), ("Z'_re", "z_re", ".4f"),
            ("Z'_im", "z_im", ".4f"), ("Y'_im", "y_im", ".6f"), ("rating_mva", "rating_mva", ".1f"))
    return [Table("equivalent pi per circuit", cols, tuple(payload["rows"]))]


_COST_COLS = (("Case", "label", ""), ("Max load (MW)", "max_load_mw", ".0f"), ("Line", "line", ".3f"),
              ("Bay", "bay", ".3f"), ("Reactor", "reactor", ".3f"), ("Loss capital", "loss_capital", ".3f"),
              ("Loss fuel", "loss_fuel", ".3f"), ("Loss O&M", "loss_om", ".3f"), ("Total", "total", ".3f"),
              ("Avg (M$/MW)", "avg_per_mw", ".3f"))


def _cost_tables(payload: dict) -> list[Table]:
    return [Table("cost breakdown (M$), ranked by average cost per MW", _COST_COLS, tuple(payload["ranking"]))]


def _tep_tables(payload: dict) -> list[Table]:
    out = []
    res = payload.get("result")
    if res is not None:
        cols = (("Case", "label", ""), ("Max load (MW)", "max_load_mw", ".0f"),
                ("Peak loss (MW)", "peak_loss_mw", ".1f"), ("Added reactor (Mvar)", "additional_reactor_mvar", ".0f"),
                ("Probes", "n_probes", ""), ("Anomaly", "anomaly", ""))
        out.append(Table("max deliverable load", cols, ({**res, "n_probes": len(res["probes"])},)))
    feas = payload.get("feasibility")
    if feas is not None:
        title = f"case {payload['case']} at {_fmt(feas['load_mw'], '.1f')} MW: {'PASS' if feas['passed'] else 'FAIL'}"
        out.append(Table(title, (("Finding", "finding", ""),),
                         tuple({"finding": v} for v in feas["violations"]) or ({"finding": "no violations"},)))
    if payload.get("digests"):
        cols = (("Scenario", "scenario", ""), ("Worst N-1 V", "worst_v_pu", ".3f"), ("Bus#", "worst_v_bus", ""),
                ("Outage", "worst_v_outage", ""), ("Max %loading", "worst_loading_pct", ".2f"),
                ("Line", "worst_loading_line", ""), ("Loading outage", "worst_loading_outage", ""))
        out.append(Table("contingency digest", cols, tuple(payload["digests"])))
    if payload.get("cost") is not None:
        out.append(Table("cost breakdown (M$)", _COST_COLS, (payload["cost"],)))
    return out


TABLE_BUILDERS: dict[str, Callable[[dict], list[Table]]] = {
    "solve": _solve_tables,
    "n1": _n1_tables,
    "sweep": _sweep_tables,
    "validate": _validate_tables,
    "lineparams": _lineparams_tables,
    "cost": _cost_tables,
    "tep": _tep_tables,
}


def _text_table(t: Table) -> str:
    header = [c[0] for c in t.columns]
    body = [[_fmt(r.get(key), spec) for _, key, spec in t.columns] for r in t.rows]
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(header)]
    numeric = [all(_is_number(r.get(key)) for r in t.rows) and bool(t.rows) for _, key, _ in t.columns]

    def line(cells):
        parts = [c.rjust(w) if num else c.ljust(w) for c, w, num in zip(cells, widths, numeric)]
        return "  ".join(parts).rstrip()

    out = [t.title, line(header), "  ".join("-" * w for w in widths)]
    out += [line(row) for row in body]
    return "\n".join(out)


def _is_number(v) -> bool:
    return v is None or (isinstance(v, (int, float)) and not isinstance(v, bool))


def _csv(tables: list[Table]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, t in enumerate(tables):
        if i:
            buf.write("\n")
        w.writerow([c[0] for c in t.columns])
        for r in t.rows:
            w.writerow(["" if r.get(key) is None else _csv_cell(r.get(key)) for _, key, _ in t.columns])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, list):
        return "; ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return v


def render(report: ReportDocument, fmt: str = "table") -> str:
    """Render ``report`` as ``table`` text, ``json`` or ``csv``."""
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    tables = TABLE_BUILDERS[report.command](report.payload)
    if fmt == "csv":
        if report.command in ("solve", "n1"):
            # one header, scenario column prepended
            return _csv([_merge_scenarios(tables, report.payload)])
        return _csv(tables)
    return "\n\n".join(_text_table(t) for t in tables) + "\n"


def _merge_scenarios(tables: list[Table], payload: dict) -> Table:
    per = len(tables) // len(payload["scenarios"]) if payload["scenarios"] else 1
    firsts = tables[::per]
    rows = []
    for t, s in zip(firsts, payload["scenarios"]):
        rows += [{**r, "scenario": s["scenario"]} for r in t.rows]
    cols = firsts[0].columns if firsts else ()
    return Table("", (("scenario", "scenario", ""),) + cols, tuple(rows))
