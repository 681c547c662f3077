"""Transmission expansion cases for a new load bus, max-load search and cost model."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .compliance import (
    LimitProfile,
    SweepReport,
    assess_case,
    enumerate_contingencies,
)
from .network import (
    Bus,
    CircuitGroup,
    Load,
    Network,
    NetworkError,
    ShuntDevice,
    apply_scenario,
)
from .powerflow import SolverOptions

log = logging.getLogger(__name__)

BUNDLED_CASES = "tep_cases.json"
SCENARIOS = ("peak", "dominant", "light")
CASE_LABELS = ("I", "II", "III", "IV", "V", "VI")


@dataclass(frozen=True)
class TepCaseSpec:
    label: str
    n_lines_16_18: int
    n_lines_17_18: int
    length_16_18: float = 324.54
    length_17_18: float = 341.84
    new_bus: int = 18
    feeder_buses: tuple[int, int] = (16, 17)
    load_power_factor: float = 0.9
    conductor_ref: str = "macaw"
    tower_ref: str = "h500_4b"
    # scenario -> shunt devices replacing that scenario's base set
    shunts: Mapping[str, tuple[ShuntDevice, ...]] = field(default_factory=dict)
    shunt_source: str = ""
    reported: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_lines_16_18 < 0 or self.n_lines_17_18 < 0:
            raise ValueError("line counts must be non-negative")
        if self.n_lines_16_18 + self.n_lines_17_18 < 1:
            raise ValueError(f"case {self.label}: at least one new circuit is required")
        if self.length_16_18 <= 0 or self.length_17_18 <= 0:
            raise ValueError("line lengths must be positive")

    @property
    def n_new_circuits(self) -> int:
        return self.n_lines_16_18 + self.n_lines_17_18

    @property
    def added_circuit_km(self) -> float:
        return self.n_lines_16_18 * self.length_16_18 + self.n_lines_17_18 * self.length_17_18

    @property
    def n_bays(self) -> int:
        # both line ends, plus one bay for the new bus's shunt compensation
        return 2 * self.n_new_circuits + 1

    def light_reactor_total(self) -> float:
        return sum(s.mvar_at_nominal for s in self.shunts.get("light", ()) if s.kind == "reactor")


def _spec_from_doc(doc: dict, c: dict) -> TepCaseSpec:
    lines = doc.get("new_lines", {})
    shunts = {
        key: tuple(ShuntDevice(int(s["bus"]), s["kind"], float(s["mvar"]), key) for s in items)
        for key, items in c.get("shunts", {}).items()
    }
    return TepCaseSpec(
        label=c["label"],
        n_lines_16_18=int(c["n_lines_16_18"]),
        n_lines_17_18=int(c["n_lines_17_18"]),
        length_16_18=float(lines.get("16-18", 324.54)),
        length_17_18=float(lines.get("17-18", 341.84)),
        new_bus=int(doc.get("new_bus", 18)),
        load_power_factor=float(doc.get("load_power_factor", 0.9)),
        conductor_ref=doc.get("conductor", "macaw"),
        tower_ref=doc.get("tower", "h500_4b"),
        shunts=shunts,
        shunt_source=c.get("shunt_source", ""),
        reported=c.get("reported", {}),
    )


def load_tep_cases(document: str | Path | None = None) -> dict[str, TepCaseSpec]:
    """Read TEP case specs; ``None`` loads the bundled cases I-VI."""
    if document is None:
        text = resources.files("tepgrid.data").joinpath(BUNDLED_CASES).read_text()
    else:
        text = Path(document).read_text()
    doc = json.loads(text)
    if "cases" not in doc:
        doc = {**doc, "cases": [doc]}
    return {c["label"]: _spec_from_doc(doc, c) for c in doc["cases"]}


def build_tep_case(base: Network, spec: TepCaseSpec, load_mw: float = 0.0) -> Network:
    """Expanded network: new PQ bus, its feeder circuits and the case's shunt sets."""
    if spec.new_bus in base.bus_ids:
        raise NetworkError(f"duplicate bus id {spec.new_bus}")
    ref = base.bus(spec.feeder_buses[0])
    buses = base.buses + (Bus(spec.new_bus, f"BUS{spec.new_bus}", ref.base_kv, "pq"),)
    groups = list(base.circuit_groups)
    for feeder, n, length in ((spec.feeder_buses[0], spec.n_lines_16_18, spec.length_16_18),
                              (spec.feeder_buses[1], spec.n_lines_17_18, spec.length_17_18)):
        if n:
            groups.append(CircuitGroup(feeder, spec.new_bus, n, length, spec.conductor_ref, spec.tower_ref))
    q_ratio = math.tan(math.acos(spec.load_power_factor))
    loads = base.loads + (Load(spec.new_bus, load_mw, load_mw * q_ratio, spec.load_power_factor),)
    scenarios = {
        key: replace(sc, shunt_set=spec.shunts[key]) if key in spec.shunts else sc
        for key, sc in base.scenarios.items()
    }
    return replace(base, buses=buses, circuit_groups=tuple(groups), loads=loads,
                   scenarios=scenarios, expected_shunt_totals={}, name=f"{base.name} + TEP case {spec.label}")


def set_new_bus_load(net: Network, bus: int, load_mw: float, power_factor: float = 0.9) -> Network:
    q_ratio = math.tan(math.acos(power_factor))
    loads = tuple(Load(bus, load_mw, load_mw * q_ratio, power_factor) if ld.bus == bus else ld
                  for ld in net.loads)
    return replace(net, loads=loads)


@dataclass(frozen=True)
class FeasibilityResult:
    load_mw: float
    passed: bool
    report: SweepReport

    @property
    def contingency_min_v(self) -> tuple[float, int | None, str, str]:
        """(voltage, bus, outage, scenario) of the lowest contingency voltage."""
        best = (math.inf, None, "", "")
        for s in self.report.scenarios:
            d = s.n1.digest
            if d.worst_v < best[0]:
                best = (d.worst_v, d.worst_v_bus, d.worst_v_outage, s.scenario)
        return best

    def violations(self) -> list[str]:
        out = []
        for s in self.report.scenarios:
            out += [f"{s.scenario} normal: {v}" for v in s.normal_violations]
            for r in s.n1.rows:
                out += [f"{s.scenario} {r.outage}: {v}" for v in r.violations]
        return out


def feasibility(net: Network, load_mw: float, bus: int = 18, opts: SolverOptions | None = None,
                profile: LimitProfile | None = None, scenarios: Sequence[str] = SCENARIOS,
                jobs: int = 1, scale_new_load: bool = False) -> FeasibilityResult:
    """Normal + N-1 compliance of ``net`` with ``load_mw`` at ``bus``.

    By default the new load is held at ``load_mw`` in every scenario, i.e. it
    is not scaled with the existing system load.
    """
    loaded = set_new_bus_load(net, bus, load_mw)
    q_mvar = next(ld.q_peak_mvar for ld in loaded.loads if ld.bus == bus)
    outages = enumerate_contingencies(loaded)
    reports = []
    for key in scenarios:
        case = apply_scenario(loaded, key)
        if not scale_new_load:
            case = case.with_bus_values(p_load={bus: load_mw}, q_load={bus: q_mvar})
        reports.append(assess_case(case, outages, opts, profile, jobs))
    rep = SweepReport(tuple(reports))
    return FeasibilityResult(load_mw, rep.ok, rep)


class NoFeasibleLoad(ValueError):
    pass


@dataclass(frozen=True)
class TepResult:
    label: str
    max_load_mw: float
    peak_loss_mw: float
    additional_reactor_mvar: float
    digests: Mapping[str, object]
    probes: tuple[tuple[float, bool], ...] = ()
    anomaly: str = ""


def max_deliverable_load(net: Network, step_mw: float = 5.0, bus: int = 18,
                         opts: SolverOptions | None = None, profile: LimitProfile | None = None,
                         upper_mw: float = 3000.0, base_light_reactor_mvar: float = 6800.0,
                         label: str = "", jobs: int = 1, scale_new_load: bool = False) -> TepResult:
    """Largest multiple of ``step_mw`` at which the expanded system stays compliant.

    Bisection assumes feasibility is monotone in the new load; the answer is
    then re-checked at ``result`` and ``result + step``. If that check
    contradicts the assumption, a descending linear scan from the bracket's
    upper end replaces the bisection answer and the anomaly is reported.

    Shunt sets sized for a heavy new load can leave the system over-compensated
    at zero load. When 0 MW fails, the lower bracket is taken from a coarse
    ascending scan (10 steps apart) instead, and that is noted as an anomaly.
    Raises :class:`NoFeasibleLoad` when no probed load up to ``upper_mw`` passes.
    """
    probes: dict[int, bool] = {}
    k_max = int(upper_mw // step_mw)
    notes = []

    def ok(k: int, fresh: bool = False) -> bool:
        if k > k_max:
            return False
        if fresh or k not in probes:
            probes[k] = feasibility(net, k * step_mw, bus, opts, profile, jobs=jobs,
                                    scale_new_load=scale_new_load).passed
        return probes[k]

    lo = 0
    if not ok(0):
        coarse = 10
        lo = next((k for k in range(coarse, k_max + 1, coarse) if ok(k)), None)
        if lo is None:
            raise NoFeasibleLoad(f"no feasible load at bus {bus} up to {upper_mw:g} MW "
                                 f"(probed every {coarse * step_mw:g} MW)")
        notes.append(f"infeasible at 0 MW; search bracketed from {lo * step_mw:g} MW")
    hi = max(lo + 1, lo * 2, int(round(200 / step_mw)))
    while ok(hi):
        lo = hi
        if hi >= k_max:
            break
        hi = min(hi * 2, k_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid

    # re-solve both ends rather than trusting the bisection's cached answers
    if not ok(lo, fresh=True) or ok(lo + 1, fresh=True):
        notes.append(f"non-monotone feasibility around {lo * step_mw:g} MW; fell back to linear scan")
        top = max(k for k in probes if not probes[k])
        lo = next((k for k in range(top, -1, -1) if ok(k) and not ok(k + 1)), lo)
    anomaly = "; ".join(notes)
    if anomaly:
        log.warning(anomaly)

    best = lo * step_mw
    final = feasibility(net, best, bus, opts, profile, jobs=jobs, scale_new_load=scale_new_load)
    peak = final.report["peak"].normal
    light_total = net.scenarios["light"].shunt_total("reactor")
    return TepResult(
        label=label,
        max_load_mw=best,
        peak_loss_mw=peak.losses_mw,
        additional_reactor_mvar=light_total - base_light_reactor_mvar,
        digests={s.scenario: s.n1.digest for s in final.report.scenarios},
        probes=tuple(sorted((k * step_mw, v) for k, v in probes.items())),
        anomaly=anomaly,
    )


def linear_scan_max_load(net: Network, step_mw: float = 5.0, bus: int = 18,
                         opts: SolverOptions | None = None, profile: LimitProfile | None = None,
                         limit_mw: float = 1000.0, scale_new_load: bool = False) -> float:
    """Exhaustive scan: the largest feasible multiple of ``step_mw`` up to ``limit_mw``."""
    for k in range(int(limit_mw // step_mw), -1, -1):
        if feasibility(net, k * step_mw, bus, opts, profile, scale_new_load=scale_new_load).passed:
            return k * step_mw
    raise NoFeasibleLoad(f"no feasible load at bus {bus} up to {limit_mw:g} MW")


# ------------------------------------------------------------------ costs

@dataclass(frozen=True)
class CostParams:
    """Unit costs in M$ (per km, per bay, per Mvar, per MW, per MW-year)."""

    line_cost: float = 2.672
    bay_cost: float = 7.0
    reactor_cost: float = 0.023625
    gen_capital: float = 1.04
    om_per_mw_year: float = 0.046819
    fuel_per_mw_year: float = 0.147076
    horizon_years: float = 30.0
    floor_negative_loss: bool = False

    @staticmethod
    def fuel_cost(gas_price_per_mmbtu: float = 2.665, heat_rate_mmbtu_per_mwh: float = 6.30,
                  hours: float = 8760.0) -> float:
        """Annual fuel bill of 1 MW of continuous output, M$."""
        return round(gas_price_per_mmbtu * heat_rate_mmbtu_per_mwh * hours / 1e6, 6)

    @staticmethod
    def om_cost(fixed_per_mw_year: float = 30000.0, variable_per_mwh: float = 1.92,
                hours: float = 8760.0) -> float:
        return round((fixed_per_mw_year + variable_per_mwh * hours) / 1e6, 6)


@dataclass(frozen=True)
class CostBreakdown:
    label: str
    line: float
    bay: float
    reactor: float
    loss_capital: float
    loss_fuel: float
    loss_om: float
    max_load_mw: float
    delta_loss_mw: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def total(self) -> float:
        return self.line + self.bay + self.reactor + self.loss_capital + self.loss_fuel + self.loss_om

    @property
    def avg_per_mw(self) -> float:
        return self.total / self.max_load_mw if self.max_load_mw else math.inf


def tep_cost(spec: TepCaseSpec, result: TepResult, params: CostParams | None = None,
             base_peak_loss_mw: float = 321.2) -> CostBreakdown:
    params = params or CostParams()
    warnings = []
    dloss = result.peak_loss_mw - base_peak_loss_mw
    if dloss < 0:
        warnings.append(f"case {spec.label}: peak loss fell by {-dloss:.2f} MW")
        log.warning(warnings[-1])
        if params.floor_negative_loss:
            dloss = 0.0
    years = params.horizon_years
    return CostBreakdown(
        label=spec.label,
        line=spec.added_circuit_km * params.line_cost,
        bay=spec.n_bays * params.bay_cost if spec.n_new_circuits else 0.0,
        reactor=result.additional_reactor_mvar * params.reactor_cost,
        loss_capital=dloss * params.gen_capital,
        loss_fuel=dloss * params.fuel_per_mw_year * years,
        loss_om=dloss * params.om_per_mw_year * years,
        max_load_mw=result.max_load_mw,
        delta_loss_mw=dloss,
        warnings=tuple(warnings),
    )


def reported_result(spec: TepCaseSpec, base_light_reactor_mvar: float = 6800.0) -> TepResult:
    """A :class:`TepResult` built from the figures shipped with a case spec."""
    r = spec.reported
    return TepResult(
        label=spec.label,
        max_load_mw=float(r["max_load_mw"]),
        peak_loss_mw=float(r["peak_loss_mw"]),
        additional_reactor_mvar=float(r["light_reactor_mvar"]) - base_light_reactor_mvar,
        digests={},
    )


def compare_cases(rows: Iterable[CostBreakdown]) -> list[CostBreakdown]:
    """Cheapest average cost per delivered MW first; ties by total, then label."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to compare")
    return sorted(rows, key=lambda c: (c.avg_per_mw, c.total, c.label))


# ----------------------------------------------------------- shunt tuning

def tune_shunts(net: Network, load_mw: float, scenario: str, bus: int = 18, step_mvar: float = 50.0,
                max_steps: int = 60, allowed_buses: Sequence[int] | None = None,
                opts: SolverOptions | None = None, profile: LimitProfile | None = None) -> tuple[Network, list[str]]:
    """Greedy heuristic: nudge one shunt by ``step_mvar`` per round toward the worst voltage violation.

    Under-voltage removes reactor (or adds capacitor) at the offending bus if
    it is in ``allowed_buses``; over-voltage does the opposite. This mirrors a
    manual tuning session and carries no optimality guarantee.
    """
    allowed = set(allowed_buses if allowed_buses is not None else net.bus_ids)
    profile = profile or LimitProfile()
    history = []
    for _ in range(max_steps):
        rep = feasibility(net, load_mw, bus, opts, profile, scenarios=(scenario,)).report[scenario]
        worst = None
        for v in list(rep.normal_violations) + [v for r in rep.n1.rows for v in r.violations]:
            if v.kind not in ("v_min", "v_max"):
                continue
            excess = v.bound - v.value if v.kind == "v_min" else v.value - v.bound
            if worst is None or excess > worst[0]:
                worst = (excess, v)
        if worst is None:
            break
        v = worst[1]
        target = int(v.element.split()[-1])
        if target not in allowed:
            history.append(f"stop: worst violation at non-adjustable bus {target}")
            break
        sc = net.scenarios[scenario]
        signed = sum(s.signed_mvar for s in sc.shunt_set if s.bus == target)
        signed += step_mvar if v.kind == "v_min" else -step_mvar
        others = tuple(s for s in sc.shunt_set if s.bus != target)
        if signed:
            kind = "capacitor" if signed > 0 else "reactor"
            others += (ShuntDevice(target, kind, abs(signed), scenario),)
        net = replace(net, scenarios={**net.scenarios, scenario: replace(sc, shunt_set=others)})
        history.append(f"{scenario}: bus {target} {signed:+g} Mvar ({v})")
    return net, history
