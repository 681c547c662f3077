"""Command-line entry point: ``tepgrid <subcommand> [options]``.

Exit status: 0 success/compliant, 1 violations found, 2 usage or data error,
3 solver failure. Reports go to stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import report as rp
from .compliance import LimitProfile, assess_case, check_limits, enumerate_contingencies, n1_sweep
from .network import BUNDLED_NETWORK, NetworkError, apply_scenario, load_network, validate_network
from .powerflow import SolverOptions, solve
from .tep import (
    CASE_LABELS,
    CostParams,
    NoFeasibleLoad,
    TepResult,
    build_tep_case,
    compare_cases,
    feasibility,
    load_tep_cases,
    max_deliverable_load,
    reported_result,
    tep_cost,
)

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3
SCENARIO_KEYS = ("peak", "dominant", "light")

log = logging.getLogger("tepgrid")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, scenarios: bool = True, formats=("table", "json", "csv")):
    p.add_argument("--network", type=Path, help="network JSON (default: bundled 17-bus system)")
    if scenarios:
        p.add_argument("--scenario", default="peak", help="peak|dominant|light|all (default: peak)")
    p.add_argument("--format", choices=formats, default="table")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for outage sweeps")
    p.add_argument("--tolerance", type=float, default=1e-8, help="mismatch tolerance, p.u.")
    p.add_argument("--no-q-limits", action="store_true", help="ignore generator reactive limits")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--timestamp", action="store_true", help="stamp the report with the current UTC time")
    p.add_argument("--no-v-max", action="store_true",
                   help="screening only: skip the upper voltage bound when checking limits")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tepgrid", description="500 kV steady-state planning studies")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("validate", help="structural and data checks"), scenarios=False,
            formats=("table", "json"))
    _common(sub.add_parser("lineparams", help="per-km constants and equivalent pi per circuit"),
            scenarios=False)
    _common(sub.add_parser("solve", help="normal-condition power flow"))
    _common(sub.add_parser("n1", help="single-circuit outage sweep"))
    _common(sub.add_parser("sweep", help="normal + N-1 compliance per scenario"))

    p = sub.add_parser("tep", help="expansion case: feasibility or max-load search")
    _common(p, scenarios=False, formats=("table", "json"))
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--case", choices=CASE_LABELS)
    g.add_argument("--spec", type=Path, help="case spec JSON")
    m = p.add_mutually_exclusive_group(required=True)
    m.add_argument("--search", action="store_true", help="search the maximum deliverable load")
    m.add_argument("--at", type=float, metavar="MW", help="single feasibility check at this load")
    p.add_argument("--step", type=float, default=5.0, help="search step, MW")
    p.add_argument("--upper", type=float, default=3000.0, help="search ceiling, MW")
    p.add_argument("--scale-new-load", action="store_true",
                   help="scale the new load with each scenario's load factor")
    p.add_argument("--cost", action="store_true", help="add the cost breakdown for the search result")
    p.add_argument("--base-loss", type=float, default=321.2, help="base-system peak loss, MW")

    p = sub.add_parser("cost", help="cost breakdown and ranking from shipped case figures")
    p.add_argument("--case", choices=CASE_LABELS + ("all",), default="all")
    p.add_argument("--spec", type=Path, help="case spec JSON")
    p.add_argument("--max-load", type=float, help="override max load, MW")
    p.add_argument("--peak-loss", type=float, help="override peak loss, MW")
    p.add_argument("--reactor", type=float, help="override additional reactor, Mvar")
    p.add_argument("--base-loss", type=float, default=321.2)
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--out", type=Path)
    p.add_argument("--timestamp", action="store_true")
    return ap


def _network(args):
    if args.network is None:
        data = resources.files("tepgrid.data").joinpath(BUNDLED_NETWORK).read_bytes()
        return load_network(), rp.digest_bytes(data)
    if not args.network.is_file():
        raise UsageError(f"network file not found: {args.network}")
    return load_network(args.network), rp.digest_bytes(args.network.read_bytes())


def _scenarios(args, net) -> list[str]:
    if args.scenario == "all":
        return [k for k in SCENARIO_KEYS if k in net.scenarios] + \
            sorted(k for k in net.scenarios if k not in SCENARIO_KEYS)
    if args.scenario not in net.scenarios:
        raise UsageError(f"unknown scenario {args.scenario!r} (have: {', '.join(net.scenarios)})")
    return [args.scenario]


def _opts(args) -> SolverOptions:
    return SolverOptions(tolerance_pu=args.tolerance, q_limit_enforcement=not args.no_q_limits)


def _profile(args) -> LimitProfile:
    if getattr(args, "no_v_max", False):
        log.warning("screening mode: upper voltage bound not checked")
        return LimitProfile(check_v_max=False)
    return LimitProfile()


def _params(args) -> dict:
    skip = {"out", "format", "timestamp", "verbose", "command", "jobs"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_validate(args):
    net, dig = _network(args)
    findings = validate_network(net)
    for f in findings:
        log.warning(f)
    payload = {"network": net.name, "findings": findings, "ok": not findings}
    return payload, dig, EXIT_VIOLATIONS if findings else EXIT_OK


def cmd_lineparams(args):
    net, dig = _network(args)
    return rp.lineparams_payload(net), dig, EXIT_OK


def cmd_solve(args):
    net, dig = _network(args)
    status = EXIT_OK
    out = []
    for key in _scenarios(args, net):
        sol = solve(apply_scenario(net, key), _opts(args))
        out.append(rp.solution_payload(sol))
        if not sol.converged:
            log.error("%s: power flow did not converge (%s); worst mismatch at bus %s",
                      key, sol.message, sol.worst_mismatch_bus)
            status = EXIT_SOLVER
            continue
        violations = check_limits(sol, _profile(args), "normal")
        for v in violations:
            log.warning("%s: %s", key, v)
        if violations and status == EXIT_OK:
            status = EXIT_VIOLATIONS
    return {"scenarios": out}, dig, status


def cmd_n1(args):
    net, dig = _network(args)
    outages = enumerate_contingencies(net)
    status = EXIT_OK
    out = []
    for key in _scenarios(args, net):
        case = apply_scenario(net, key)
        base = solve(case, _opts(args))
        if not base.converged:
            log.error("%s: base case did not converge (%s)", key, base.message)
            return {"scenarios": out}, dig, EXIT_SOLVER
        res = n1_sweep(case, outages, _opts(args), _profile(args), base=base, jobs=args.jobs)
        if not res.ok:
            status = EXIT_VIOLATIONS
        out.append(rp.n1_payload(res))
    return {"scenarios": out}, dig, status


def cmd_sweep(args):
    net, dig = _network(args)
    outages = enumerate_contingencies(net)
    status = EXIT_OK
    out = []
    for key in _scenarios(args, net):
        rep = assess_case(apply_scenario(net, key), outages, _opts(args), _profile(args), args.jobs)
        if not rep.normal.converged:
            log.error("%s: base case did not converge (%s)", key, rep.normal.message)
            status = EXIT_SOLVER
        elif not rep.ok and status == EXIT_OK:
            status = EXIT_VIOLATIONS
        out.append(rp.scenario_payload(rep))
    return {"scenarios": out}, dig, status


def _case_spec(args):
    if args.spec is not None:
        if not args.spec.is_file():
            raise UsageError(f"case spec not found: {args.spec}")
        cases = load_tep_cases(args.spec)
        if len(cases) != 1 and not getattr(args, "case", None):
            raise UsageError("spec file holds several cases")
        return next(iter(cases.values()))
    return load_tep_cases()[args.case]


def cmd_tep(args):
    net, dig = _network(args)
    spec = _case_spec(args)
    expanded = build_tep_case(net, spec)
    payload = {"case": spec.label, "shunt_source": spec.shunt_source}
    if args.at is not None:
        res = feasibility(expanded, args.at, spec.new_bus, _opts(args), _profile(args), jobs=args.jobs,
                          scale_new_load=args.scale_new_load)
        payload["feasibility"] = {"load_mw": args.at, "passed": res.passed, "violations": res.violations()}
        payload["digests"] = rp.digest_rows({s.scenario: s.n1.digest for s in res.report.scenarios})
        return payload, dig, EXIT_OK if res.passed else EXIT_VIOLATIONS
    try:
        result = max_deliverable_load(expanded, args.step, spec.new_bus, _opts(args), _profile(args),
                                      upper_mw=args.upper, label=spec.label, jobs=args.jobs,
                                      scale_new_load=args.scale_new_load)
    except NoFeasibleLoad as e:
        log.error(str(e))
        payload["result"] = None
        return payload, dig, EXIT_VIOLATIONS
    if result.anomaly:
        log.warning(result.anomaly)
    payload["result"] = rp.tep_result_payload(result)
    payload["digests"] = rp.digest_rows(result.digests)
    if args.cost:
        payload["cost"] = rp.cost_payload(tep_cost(spec, result, CostParams(), args.base_loss))
    return payload, dig, EXIT_OK


def cmd_cost(args):
    if args.spec is not None:
        if not args.spec.is_file():
            raise UsageError(f"case spec not found: {args.spec}")
        text = args.spec.read_bytes()
        cases = load_tep_cases(args.spec)
    else:
        text = resources.files("tepgrid.data").joinpath("tep_cases.json").read_bytes()
        cases = load_tep_cases()
    labels = list(cases) if args.case == "all" else [args.case]
    rows = []
    for lab in labels:
        if lab not in cases:
            raise UsageError(f"unknown case {lab!r}")
        spec = cases[lab]
        if "max_load_mw" not in spec.reported and args.max_load is None:
            raise UsageError(f"case {lab}: no shipped figures; pass --max-load/--peak-loss/--reactor")
        res = reported_result(spec) if spec.reported else TepResult(lab, 0.0, args.base_loss, 0.0, {})
        if args.max_load is not None:
            res = replace(res, max_load_mw=args.max_load)
        if args.peak_loss is not None:
            res = replace(res, peak_loss_mw=args.peak_loss)
        if args.reactor is not None:
            res = replace(res, additional_reactor_mvar=args.reactor)
        if not res.max_load_mw > 0:
            raise UsageError(f"case {lab}: max load must be positive")
        rows.append(tep_cost(spec, res, CostParams(), args.base_loss))
    ranked = compare_cases(rows)
    payload = {"ranking": [rp.cost_payload(c) for c in ranked], "base_loss_mw": args.base_loss}
    return payload, rp.digest_bytes(text), EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "lineparams": cmd_lineparams,
    "solve": cmd_solve,
    "n1": cmd_n1,
    "sweep": cmd_sweep,
    "tep": cmd_tep,
    "cost": cmd_cost,
}


def dispatch(argv: list[str] | None = None, stdout=None) -> int:
    """Run one subcommand and return its exit status."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        payload, dig, status = COMMANDS[args.command](args)
    except (UsageError, NetworkError, KeyError, ValueError, json.JSONDecodeError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"tepgrid {args.command}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if args.timestamp else None
    doc = rp.ReportDocument(args.command, _params(args), payload, dig, generated_at=stamp)
    text = rp.render(doc, args.format)
    if args.out is not None:
        args.out.write_text(text)
    else:
        stdout.write(text)
    return status


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
