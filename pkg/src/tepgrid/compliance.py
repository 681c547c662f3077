"""Operating-limit audits and single-circuit (N-1) contingency sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .network import CaseSpec, Network, apply_scenario, is_connected
from .powerflow import PowerFlowSolution, SolverOptions, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LimitProfile:
    v_min_normal: float = 0.95
    v_max: float = 1.05
    v_min_contingency: float = 0.90
    loading_max_pct: float = 100.0
    # False screens only the lower voltage bounds (plus Q and loading limits)
    check_v_max: bool = True
    # slack on every bound, so values that only differ by solver noise are not flagged
    tolerance: float = 1e-6

    def __post_init__(self):
        if not self.v_min_contingency < self.v_min_normal < self.v_max:
            raise ValueError("need v_min_contingency < v_min_normal < v_max")

    def v_min(self, mode: str) -> float:
        if mode not in ("normal", "contingency"):
            raise ValueError(f"unknown mode {mode!r}")
        return self.v_min_normal if mode == "normal" else self.v_min_contingency


@dataclass(frozen=True)
class Violation:
    kind: str  # v_min | v_max | q_max | q_min | loading | nonconvergence
    element: str
    value: float
    bound: float

    def __str__(self):
        if self.kind == "nonconvergence":
            return f"power flow did not converge ({self.element})"
        return f"{self.kind} at {self.element}: {self.value:.4f} vs {self.bound:.4f}"


def check_limits(sol: PowerFlowSolution, profile: LimitProfile | None = None,
                 mode: str = "normal") -> list[Violation]:
    """Voltage band, generator reactive range and circuit loading checks.

    The slack unit's reactive output is not limited.
    """
    profile = profile or LimitProfile()
    tol = profile.tolerance
    v_lo = profile.v_min(mode)
    out = []
    for bus, vm in zip(sol.bus_ids, sol.vm):
        if vm < v_lo - tol:
            out.append(Violation("v_min", f"bus {bus}", float(vm), v_lo))
        elif profile.check_v_max and vm > profile.v_max + tol:
            out.append(Violation("v_max", f"bus {bus}", float(vm), profile.v_max))
    qtol = tol * sol.base_mva
    for k, bus in enumerate(sol.bus_ids):
        if not sol.has_gen[k] or sol.kinds[k] == "slack":
            continue
        q = sol.q_gen[k]
        if q > sol.q_max[k] + qtol:
            out.append(Violation("q_max", f"gen {bus}", float(q), float(sol.q_max[k])))
        elif q < sol.q_min[k] - qtol:
            out.append(Violation("q_min", f"gen {bus}", float(q), float(sol.q_min[k])))
    for f in sol.flows:
        if f.loading_pct > profile.loading_max_pct + tol:
            out.append(Violation("loading", f"line {f.label} #{f.circuit}", f.loading_pct,
                                 profile.loading_max_pct))
    return out


@dataclass(frozen=True)
class Outage:
    group: int
    circuit: int
    label: str
    islanding: bool = False


def outage_label(from_bus: int, to_bus: int, n_circuits: int) -> str:
    base = f"{from_bus}-{to_bus}"
    return f"{base} (1 line)" if n_circuits > 1 else base


def enumerate_contingencies(net: Network) -> list[Outage]:
    """One outage per circuit group, in declaration order.

    Circuits of a group are identical, so outaging circuit 1 stands for all.
    """
    out = []
    for gi, g in enumerate(net.circuit_groups):
        island = not is_connected(net, (gi, 1))
        if island:
            log.warning("outage of %s islands the network; excluded from the sweep", g.label)
        out.append(Outage(gi, 1, outage_label(g.from_bus, g.to_bus, g.n_circuits), island))
    return out


@dataclass(frozen=True)
class ContingencyRow:
    outage: str
    converged: bool
    lowest_v: float = math.nan
    lowest_v_bus: int | None = None
    lowest_v_bus_kind: str = ""
    highest_loading_pct: float = math.nan
    highest_loading_line: str = ""
    violations: tuple[Violation, ...] = ()
    islanding: bool = False
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.converged and not self.violations and not self.islanding


@dataclass(frozen=True)
class SweepDigest:
    worst_v: float
    worst_v_bus: int | None
    worst_v_outage: str
    worst_loading_pct: float
    worst_loading_line: str
    worst_loading_outage: str
    n_rows: int
    n_failed: int


@dataclass(frozen=True)
class N1Result:
    scenario: str
    rows: tuple[ContingencyRow, ...]
    digest: SweepDigest

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def _row(outage: Outage, sol: PowerFlowSolution, profile: LimitProfile) -> ContingencyRow:
    if not sol.converged:
        return ContingencyRow(outage.label, False, violations=(Violation("nonconvergence", sol.message, math.nan, math.nan),),
                              iterations=sol.iterations, message=sol.message)
    k = int(np.argmin(sol.vm))
    worst = max(sol.flows, key=lambda f: f.loading_pct)
    return ContingencyRow(
        outage=outage.label,
        converged=True,
        lowest_v=float(sol.vm[k]),
        lowest_v_bus=sol.bus_ids[k],
        lowest_v_bus_kind=sol.kinds[k],
        highest_loading_pct=worst.loading_pct,
        highest_loading_line=worst.label,
        violations=tuple(check_limits(sol, profile, "contingency")),
        iterations=sol.iterations,
    )


def _solve_outage(args):
    case, outage, opts, base_sol, profile = args
    sol = solve(case.without_circuit(outage.group, outage.circuit), opts, initial=base_sol)
    return _row(outage, sol, profile)


def digest(rows: Sequence[ContingencyRow]) -> SweepDigest:
    solved = [r for r in rows if r.converged]
    if solved:
        wv = min(solved, key=lambda r: r.lowest_v)
        wl = max(solved, key=lambda r: r.highest_loading_pct)
        return SweepDigest(wv.lowest_v, wv.lowest_v_bus, wv.outage, wl.highest_loading_pct,
                           wl.highest_loading_line, wl.outage, len(rows), sum(not r.ok for r in rows))
    return SweepDigest(math.nan, None, "", math.nan, "", "", len(rows), sum(not r.ok for r in rows))


def n1_sweep(case: CaseSpec, outages: Iterable[Outage], opts: SolverOptions | None = None,
             profile: LimitProfile | None = None, base: PowerFlowSolution | None = None,
             jobs: int = 1) -> N1Result:
    """Solve every outage of ``outages`` (warm-started from the base case)."""
    opts = opts or SolverOptions()
    profile = profile or LimitProfile()
    if base is None:
        base = solve(case, opts)
    outages = list(outages)
    rows: list[ContingencyRow | None] = [None] * len(outages)
    todo = []
    for i, o in enumerate(outages):
        if o.islanding:
            rows[i] = ContingencyRow(o.label, False, islanding=True, message="islanding")
        else:
            todo.append(i)
    args = [(case, outages[i], opts, base if base.converged else None, profile) for i in todo]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_outage, args))
    else:
        results = [_solve_outage(a) for a in args]
    for i, r in zip(todo, results):
        rows[i] = r
    return N1Result(case.scenario, tuple(rows), digest(rows))


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    normal: PowerFlowSolution
    normal_violations: tuple[Violation, ...]
    n1: N1Result

    @property
    def ok(self) -> bool:
        return self.normal.converged and not self.normal_violations and self.n1.ok


@dataclass(frozen=True)
class SweepReport:
    scenarios: tuple[ScenarioReport, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.scenarios)

    def __getitem__(self, key: str) -> ScenarioReport:
        for s in self.scenarios:
            if s.scenario == key:
                return s
        raise KeyError(key)


def assess_case(case: CaseSpec, outages: Sequence[Outage], opts: SolverOptions | None = None,
                profile: LimitProfile | None = None, jobs: int = 1) -> ScenarioReport:
    opts = opts or SolverOptions()
    profile = profile or LimitProfile()
    base = solve(case, opts)
    if not base.converged:
        normal_v = (Violation("nonconvergence", base.message, math.nan, math.nan),)
    else:
        normal_v = tuple(check_limits(base, profile, "normal"))
    n1 = n1_sweep(case, outages, opts, profile, base=base, jobs=jobs)
    return ScenarioReport(case.scenario, base, normal_v, n1)


def scenario_sweep(net: Network, keys: Iterable[str], opts: SolverOptions | None = None,
                   profile: LimitProfile | None = None, jobs: int = 1) -> SweepReport:
    """Normal-condition and N-1 assessment for each named scenario."""
    outages = enumerate_contingencies(net)
    reports = [assess_case(apply_scenario(net, k), outages, opts, profile, jobs) for k in keys]
    return SweepReport(tuple(reports))
