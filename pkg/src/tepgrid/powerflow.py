"""Bus admittance matrix and Newton-Raphson AC power flow.

The system is small (tens of buses), so everything is dense: the Jacobian
is solved with LAPACK's partial-pivot LU via :func:`numpy.linalg.solve`.
Cost grows as N**3 per iteration; beyond a few hundred buses a sparse
factorisation would be the right tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import CaseSpec


class PowerFlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class AdmittanceMatrix:
    matrix: np.ndarray
    index: dict[int, int]

    def __getitem__(self, ids):
        i, j = ids
        return self.matrix[self.index[i], self.index[j]]


@dataclass(frozen=True)
class SolverOptions:
    tolerance_pu: float = 1e-8
    max_iterations: int = 30
    flat_start: bool = True
    q_limit_enforcement: bool = True
    max_switch_rounds: int = 10

    def __post_init__(self):
        if not self.tolerance_pu > 0:
            raise ValueError("tolerance_pu must be positive")


@dataclass(frozen=True)
class BranchFlow:
    group: int
    circuit: int
    from_bus: int
    to_bus: int
    s_from_mva: complex
    s_to_mva: complex
    rating_mva: float

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"

    @property
    def loading_pct(self) -> float:
        return 100 * max(abs(self.s_from_mva), abs(self.s_to_mva)) / self.rating_mva

    @property
    def loss_mva(self) -> complex:
        return self.s_from_mva + self.s_to_mva


@dataclass(frozen=True)
class PowerFlowSolution:
    """Solved operating point. Per-bus arrays follow ``bus_ids`` order."""

    scenario: str
    bus_ids: tuple[int, ...]
    kinds: tuple[str, ...]
    vm: np.ndarray
    va_deg: np.ndarray
    p_gen: np.ndarray
    q_gen: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray
    q_shunt: np.ndarray
    has_gen: tuple[bool, ...]
    q_min: np.ndarray
    q_max: np.ndarray
    flows: tuple[BranchFlow, ...]
    converged: bool
    iterations: int
    mismatch_trace: tuple[float, ...]
    switched_to_pq: tuple[int, ...] = ()
    worst_mismatch_bus: int | None = None
    message: str = ""
    base_mva: float = 100.0
    group_labels: tuple[str, ...] = field(default=(), repr=False)

    @property
    def losses_mw(self) -> float:
        return float(sum(f.loss_mva.real for f in self.flows))

    @property
    def losses_mvar(self) -> float:
        return float(sum(f.loss_mva.imag for f in self.flows))

    def bus_index(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)

    def voltage(self, bus_id: int) -> float:
        return float(self.vm[self.bus_index(bus_id)])

    def angle(self, bus_id: int) -> float:
        return float(self.va_deg[self.bus_index(bus_id)])


def build_ybus(case: CaseSpec) -> AdmittanceMatrix:
    index = {b: k for k, b in enumerate(case.bus_ids)}
    n = len(index)
    y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if br.z_pu == 0:
            raise PowerFlowError(f"zero-impedance branch {br.label}")
        i, j = index[br.from_bus], index[br.to_bus]
        ys = 1 / br.z_pu
        y[i, i] += ys + br.y_pu / 2
        y[j, j] += ys + br.y_pu / 2
        y[i, j] -= ys
        y[j, i] -= ys
    for k, q in enumerate(case.shunt_mvar):
        y[k, k] += 1j * q / case.base_mva
    return AdmittanceMatrix(y, index)


def _injections(y, v):
    return v * np.conj(y @ v)


def _jacobian(y, v, pvpq, pq):
    """Polar Jacobian blocks dP/dtheta, dP/d|V|, dQ/dtheta, dQ/d|V|."""
    ibus = y @ v
    diag_v = np.diag(v)
    ds_dva = 1j * diag_v @ np.conj(np.diag(ibus) - y @ diag_v)
    vnorm = v / np.abs(v)
    ds_dvm = diag_v @ np.conj(y @ np.diag(vnorm)) + np.diag(vnorm) @ np.conj(np.diag(ibus))
    return np.block([
        [ds_dva.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
        [ds_dva.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
    ])


def _newton(y, v, p_spec, q_spec, kinds, opts):
    """Inner Newton loop with fixed bus types. Returns (v, converged, iters, trace, worst, msg)."""
    pvpq = [k for k, t in enumerate(kinds) if t != "slack"]
    pq = [k for k, t in enumerate(kinds) if t == "pq"]
    npv = len(pvpq)
    trace = []
    worst = None
    for it in range(opts.max_iterations + 1):
        s = _injections(y, v)
        mis = np.r_[(p_spec - s.real)[pvpq], (q_spec - s.imag)[pq]]
        if mis.size == 0:
            return v, True, it, trace, None, ""
        k = int(np.argmax(np.abs(mis)))
        worst = pvpq[k] if k < npv else pq[k - npv]
        norm = float(np.abs(mis).max())
        trace.append(norm)
        if not math.isfinite(norm) or norm > 1e6:
            return v, False, it, trace, worst, "diverged"
        if norm < opts.tolerance_pu:
            return v, True, it, trace, worst, ""
        if it == opts.max_iterations:
            break
        jac = _jacobian(y, v, pvpq, pq)
        try:
            dx = np.linalg.solve(jac, mis)
        except np.linalg.LinAlgError:
            return v, False, it, trace, worst, "singular Jacobian"
        va = np.angle(v)
        vm = np.abs(v)
        va[pvpq] += dx[:npv]
        vm[pq] += dx[npv:]
        v = vm * np.exp(1j * va)
    return v, False, opts.max_iterations, trace, worst, "iteration limit reached"


def solve(case: CaseSpec, opts: SolverOptions | None = None,
          initial: PowerFlowSolution | None = None) -> PowerFlowSolution:
    """Newton-Raphson power flow with optional generator Q-limit switching.

    Limits are checked after each converged inner solve: a violating PV bus
    is pinned at the binding limit as a PQ bus, and released back to PV when
    its voltage could be recovered from the limit. A bus that keeps
    flip-flopping is pinned at the limit it hit in most rounds.
    """
    opts = opts or SolverOptions()
    ybus = build_ybus(case)
    y = ybus.matrix
    base = case.base_mva
    n = case.n_bus
    kinds = list(case.kinds)
    v_set = np.array(case.v_set)
    p_load = np.array(case.p_load)
    q_load = np.array(case.q_load)
    p_gen = np.array(case.p_gen)
    q_min = np.array(case.q_min)
    q_max = np.array(case.q_max)

    vm = np.where(np.array(kinds) == "pq", 1.0, v_set)
    va = np.zeros(n)
    if initial is not None and initial.converged and tuple(initial.bus_ids) == tuple(case.bus_ids):
        va = np.radians(initial.va_deg)
        vm = np.where(np.array(kinds) == "pq", initial.vm, v_set)
    v = vm * np.exp(1j * va)

    p_spec = (p_gen - p_load) / base
    q_fixed = {}  # bus index -> pinned Q_g (MW scale)
    hits = {}  # bus index -> list of "max"/"min"
    trace_all = []
    iters = 0
    converged = False
    worst = None
    msg = ""
    for _ in range(opts.max_switch_rounds + 1):
        q_gen_spec = np.array([q_fixed.get(k, 0.0) for k in range(n)])
        q_spec = (q_gen_spec - q_load) / base
        v, converged, it, trace, worst, msg = _newton(y, v, p_spec, q_spec, kinds, opts)
        iters += it
        trace_all.extend(trace)
        if not converged or not opts.q_limit_enforcement:
            break
        s = _injections(y, v) * base
        qg = s.imag + q_load
        changed = False
        tol = 1e-9 * base
        release = []
        for k in range(n):
            if case.kinds[k] != "pv":
                continue
            if kinds[k] == "pv":
                side = "max" if qg[k] > q_max[k] + tol else "min" if qg[k] < q_min[k] - tol else None
                if side is None:
                    continue
                hits.setdefault(k, []).append(side)
                if len(hits[k]) > 1:
                    # oscillating: pin at the majority limit for good
                    side = max(("max", "min"), key=hits[k].count)
                kinds[k] = "pq"
                q_fixed[k] = q_max[k] if side == "max" else q_min[k]
                changed = True
            elif len(hits.get(k, [])) < 2:
                dv = abs(v[k]) - v_set[k]
                at_max = q_fixed[k] == q_max[k]
                if (at_max and dv > 1e-9) or (not at_max and dv < -1e-9):
                    release.append((abs(dv), k))
        if not changed:
            for _, k in release:
                kinds[k] = "pv"
                del q_fixed[k]
                v[k] = v_set[k] * np.exp(1j * np.angle(v[k]))
                changed = True
        if not changed:
            break
    else:
        converged = False
        msg = "Q-limit switching did not settle"

    s = _injections(y, v) * base
    vm = np.abs(v)
    p_g = np.where(np.array(case.kinds) == "slack", s.real + p_load, p_gen)
    q_g = np.where(np.array(case.has_gen), s.imag + q_load, 0.0)
    q_sh = np.array(case.shunt_mvar) * vm ** 2

    idx = ybus.index
    flows = []
    for br in case.branches:
        vf, vt = v[idx[br.from_bus]], v[idx[br.to_bus]]
        i_series = (vf - vt) / br.z_pu
        i_f = i_series + vf * br.y_pu / 2
        i_t = -i_series + vt * br.y_pu / 2
        flows.append(BranchFlow(br.group, br.circuit, br.from_bus, br.to_bus,
                                complex(vf * np.conj(i_f) * base), complex(vt * np.conj(i_t) * base),
                                br.rating_mva))

    return PowerFlowSolution(
        scenario=case.scenario,
        bus_ids=case.bus_ids,
        kinds=case.kinds,
        vm=vm,
        va_deg=np.degrees(np.angle(v)),
        p_gen=p_g,
        q_gen=q_g,
        p_load=p_load,
        q_load=q_load,
        q_shunt=q_sh,
        has_gen=case.has_gen,
        q_min=q_min,
        q_max=q_max,
        flows=tuple(flows),
        converged=converged,
        iterations=iters,
        mismatch_trace=tuple(trace_all),
        switched_to_pq=tuple(case.bus_ids[k] for k in sorted(q_fixed)),
        worst_mismatch_bus=None if worst is None else case.bus_ids[worst],
        message=msg,
        base_mva=base,
        group_labels=case.group_labels,
    )


@dataclass(frozen=True)
class SystemSummary:
    total_gen_mw: float
    total_load_mw: float
    losses_mw: float
    top_loadings: tuple[tuple[str, float], ...]
    v_min: tuple[int, float]
    v_max: tuple[int, float]


def system_summary(sol: PowerFlowSolution, top: int = 3) -> SystemSummary:
    """Totals, the most heavily loaded corridors and the voltage extremes.

    Parallel circuits of one corridor carry identical flow, so each corridor
    is listed once with its highest circuit loading.
    """
    best: dict[str, float] = {}
    for f in sol.flows:
        best[f.label] = max(best.get(f.label, 0.0), f.loading_pct)
    ranked = sorted(best.items(), key=lambda kv: -kv[1])[:top]
    kmin, kmax = int(np.argmin(sol.vm)), int(np.argmax(sol.vm))
    return SystemSummary(
        total_gen_mw=float(sol.p_gen.sum()),
        total_load_mw=float(sol.p_load.sum()),
        losses_mw=sol.losses_mw,
        top_loadings=tuple((k, float(v)) for k, v in ranked),
        v_min=(sol.bus_ids[kmin], float(sol.vm[kmin])),
        v_max=(sol.bus_ids[kmax], float(sol.vm[kmax])),
    )
