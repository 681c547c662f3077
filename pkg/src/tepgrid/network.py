"""Grid data model, document loader, scenario assembly and validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lines import (
    ConductorSpec,
    PiModel,
    TowerGeometry,
    UnitLineParams,
    equivalent_pi,
    thermal_rating,
    unit_parameters,
)

SCHEMA_VERSION = 1
BUNDLED_NETWORK = "ieee_style_17bus_500kv.json"
PF_090_RATIO = math.tan(math.acos(0.9))

BUS_KINDS = ("slack", "pv", "pq")
SHUNT_KINDS = ("capacitor", "reactor")


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network documents."""


@dataclass(frozen=True)
class Bus:
    id: int
    name: str
    base_kv: float
    kind: str
    v_setpoint: float | None = None
    angle_setpoint: float | None = None


@dataclass(frozen=True)
class CircuitGroup:
    from_bus: int
    to_bus: int
    n_circuits: int
    length_km: float
    conductor_ref: str
    tower_ref: str

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class Generator:
    bus: int
    p_peak_mw: float | None  # None for the slack unit
    lag_factor: float = 0.6
    lead_factor: float = -0.3


@dataclass(frozen=True)
class Load:
    bus: int
    p_peak_mw: float
    q_peak_mvar: float
    power_factor: float = 0.9


@dataclass(frozen=True)
class ShuntDevice:
    bus: int
    kind: str
    mvar_at_nominal: float
    scenario: str

    @property
    def signed_mvar(self) -> float:
        """Injection at 1.0 p.u.: positive for capacitors, negative for reactors."""
        return self.mvar_at_nominal if self.kind == "capacitor" else -self.mvar_at_nominal


@dataclass(frozen=True)
class Scenario:
    key: str
    load_scale: float
    dispatch_scale: float
    slack_voltage: float
    pv_voltage_override: float | None = None
    shunt_set: tuple[ShuntDevice, ...] = ()

    def shunt_total(self, kind: str) -> float:
        return sum(s.mvar_at_nominal for s in self.shunt_set if s.kind == kind)


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    circuit_groups: tuple[CircuitGroup, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    scenarios: Mapping[str, Scenario]
    conductors: Mapping[str, ConductorSpec]
    towers: Mapping[str, TowerGeometry]
    base_mva: float = 100.0
    frequency_hz: float = 60.0
    nominal_kv: float = 500.0
    loading_cap: float = 0.8
    # (conductor, tower) -> constants that override the geometry-derived ones
    line_constants: Mapping[tuple[str, str], UnitLineParams] = field(default_factory=dict)
    expected_shunt_totals: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    name: str = ""

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    @property
    def n_circuits(self) -> int:
        return sum(g.n_circuits for g in self.circuit_groups)

    def unit_params(self, group: CircuitGroup) -> UnitLineParams:
        key = (group.conductor_ref, group.tower_ref)
        if key in self.line_constants:
            return self.line_constants[key]
        return unit_parameters(self.towers[group.tower_ref], self.conductors[group.conductor_ref],
                               self.frequency_hz)

    def circuit_rating(self, group: CircuitGroup) -> float:
        tower = self.towers[group.tower_ref]
        _, rating = thermal_rating(self.nominal_kv, self.conductors[group.conductor_ref],
                                   tower.bundle_count, self.loading_cap)
        return rating

    def pi_model(self, group: CircuitGroup) -> PiModel:
        """Equivalent pi of one circuit of ``group`` (physical units)."""
        return equivalent_pi(self.unit_params(group), group.length_km, self.circuit_rating(group))

    def with_geometry_constants(self) -> "Network":
        """Copy that derives every line constant from tower geometry."""
        return replace(self, line_constants={})


@dataclass(frozen=True)
class Branch:
    """One in-service circuit of a solvable case, in per unit."""

    group: int
    circuit: int
    from_bus: int
    to_bus: int
    z_pu: complex
    y_pu: complex
    rating_mva: float

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class CaseSpec:
    """A fully specified, solvable operating case.

    Per-bus tuples follow ``bus_ids`` order. Generator quantities are MW/Mvar;
    ``q_min``/``q_max`` are +-inf where no limit applies.
    """

    scenario: str
    base_mva: float
    bus_ids: tuple[int, ...]
    kinds: tuple[str, ...]
    v_set: tuple[float, ...]
    p_load: tuple[float, ...]
    q_load: tuple[float, ...]
    has_gen: tuple[bool, ...]
    p_gen: tuple[float, ...]
    q_min: tuple[float, ...]
    q_max: tuple[float, ...]
    shunt_mvar: tuple[float, ...]
    branches: tuple[Branch, ...]
    group_labels: tuple[str, ...] = ()
    group_sizes: tuple[int, ...] = ()

    @property
    def n_bus(self) -> int:
        return len(self.bus_ids)

    def index(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)

    def without_circuit(self, group: int, circuit: int = 1) -> "CaseSpec":
        keep = tuple(br for br in self.branches if not (br.group == group and br.circuit == circuit))
        if len(keep) == len(self.branches):
            raise KeyError((group, circuit))
        return replace(self, branches=keep)

    def with_bus_values(self, **updates: Mapping[int, float]) -> "CaseSpec":
        """Replace per-bus entries, e.g. ``with_bus_values(p_load={18: 1115.0})``."""
        changes = {}
        for name, values in updates.items():
            cur = list(getattr(self, name))
            for bus_id, v in values.items():
                cur[self.index(bus_id)] = v
            changes[name] = tuple(cur)
        return replace(self, **changes)


# ---------------------------------------------------------------- loading

def _need(obj, key, where):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise NetworkError(f"{where}: missing field {key!r}") from None


def _num(obj, key, where, default=None):
    if key not in obj or obj[key] is None:
        if default is not None:
            return default
        raise NetworkError(f"{where}: missing field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NetworkError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def parse_network(doc: dict) -> Network:
    """Build a :class:`Network` from an already-decoded description document."""
    if not isinstance(doc, dict):
        raise NetworkError("document root must be an object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise NetworkError(f"unsupported schema_version {version!r}")
    system = doc.get("system", {})
    f_hz = _num(system, "frequency_hz", "system", 60.0)

    buses = []
    for i, b in enumerate(_need(doc, "buses", "document")):
        where = f"buses[{i}]"
        kind = _need(b, "kind", where)
        if kind not in BUS_KINDS:
            raise NetworkError(f"{where}.kind: unknown bus kind {kind!r}")
        vset = b.get("v_setpoint")
        if kind != "pq" and vset is None:
            raise NetworkError(f"{where}: {kind} bus needs v_setpoint")
        buses.append(Bus(
            id=int(_need(b, "id", where)),
            name=str(b.get("name", f"BUS{b['id']}")),
            base_kv=_num(b, "base_kv", where),
            kind=kind,
            v_setpoint=None if vset is None else float(vset),
            angle_setpoint=float(b.get("angle_setpoint", 0.0)) if kind == "slack" else None,
        ))

    groups = []
    for i, g in enumerate(_need(doc, "circuit_groups", "document")):
        where = f"circuit_groups[{i}]"
        groups.append(CircuitGroup(
            from_bus=int(_need(g, "from_bus", where)),
            to_bus=int(_need(g, "to_bus", where)),
            n_circuits=int(_need(g, "n_circuits", where)),
            length_km=_num(g, "length_km", where),
            conductor_ref=str(_need(g, "conductor", where)),
            tower_ref=str(_need(g, "tower", where)),
        ))

    gens = []
    for i, g in enumerate(doc.get("generators", [])):
        where = f"generators[{i}]"
        p = g.get("p_peak_mw")
        gens.append(Generator(
            bus=int(_need(g, "bus", where)),
            p_peak_mw=None if p is None else float(p),
            lag_factor=float(g.get("lag_factor", 0.6)),
            lead_factor=float(g.get("lead_factor", -0.3)),
        ))

    loads = []
    for i, ld in enumerate(doc.get("loads", [])):
        where = f"loads[{i}]"
        p = _num(ld, "p_peak_mw", where)
        pf = float(ld.get("power_factor", 0.9))
        q = ld.get("q_peak_mvar")
        q = p * math.tan(math.acos(pf)) if q is None else float(q)
        loads.append(Load(int(_need(ld, "bus", where)), p, q, pf))

    scenarios = {}
    for key, s in doc.get("scenarios", {}).items():
        where = f"scenarios.{key}"
        shunts = []
        for j, sd in enumerate(s.get("shunts", [])):
            kind = _need(sd, "kind", f"{where}.shunts[{j}]")
            if kind not in SHUNT_KINDS:
                raise NetworkError(f"{where}.shunts[{j}].kind: unknown shunt kind {kind!r}")
            shunts.append(ShuntDevice(int(_need(sd, "bus", where)), kind,
                                      _num(sd, "mvar", f"{where}.shunts[{j}]"), key))
        override = s.get("pv_voltage_override")
        scenarios[key] = Scenario(
            key=key,
            load_scale=_num(s, "load_scale", where),
            dispatch_scale=_num(s, "dispatch_scale", where, _num(s, "load_scale", where)),
            slack_voltage=_num(s, "slack_voltage", where),
            pv_voltage_override=None if override is None else float(override),
            shunt_set=tuple(shunts),
        )

    conductors = {}
    for key, c in doc.get("conductors", {}).items():
        try:
            conductors[key] = ConductorSpec(
                name=c.get("name", key),
                outer_diameter_m=_num(c, "outer_diameter_m", f"conductors.{key}"),
                resistance_per_km=_num(c, "resistance_per_km", f"conductors.{key}"),
                ampacity_a=_num(c, "ampacity_a", f"conductors.{key}"),
                gmr_m=c.get("gmr_m"),
            )
        except ValueError as e:
            raise NetworkError(f"conductors.{key}: {e}") from None

    towers = {}
    for key, t in doc.get("towers", {}).items():
        try:
            towers[key] = TowerGeometry(
                name=t.get("name", key),
                phase_positions=tuple(map(tuple, _need(t, "phase_positions", f"towers.{key}"))),
                bundle_count=int(_need(t, "bundle_count", f"towers.{key}")),
                bundle_spacing_m=float(t.get("bundle_spacing_m", 0.0)),
            )
        except ValueError as e:
            raise NetworkError(f"towers.{key}: {e}") from None

    constants = {}
    for i, lc in enumerate(doc.get("line_constants", [])):
        where = f"line_constants[{i}]"
        constants[(lc["conductor"], lc["tower"])] = UnitLineParams.from_rlc(
            _num(lc, "r_ohm_per_km", where), _num(lc, "l_mh_per_km", where),
            _num(lc, "c_nf_per_km", where), f_hz)

    net = Network(
        buses=tuple(buses),
        circuit_groups=tuple(groups),
        generators=tuple(gens),
        loads=tuple(loads),
        scenarios=scenarios,
        conductors=conductors,
        towers=towers,
        base_mva=_num(system, "base_mva", "system", 100.0),
        frequency_hz=f_hz,
        nominal_kv=_num(system, "nominal_kv", "system", 500.0),
        loading_cap=_num(system, "loading_cap", "system", 0.8),
        line_constants=constants,
        expected_shunt_totals=doc.get("expected_shunt_totals", {}),
        name=str(doc.get("name", "")),
    )
    _check_structure(net)
    return net


def _check_structure(net: Network) -> None:
    """Hard errors: anything that makes the network unusable."""
    ids = [b.id for b in net.buses]
    seen = set()
    for i in ids:
        if i in seen:
            raise NetworkError(f"duplicate bus id {i}")
        seen.add(i)
    if sum(b.kind == "slack" for b in net.buses) != 1:
        raise NetworkError("network must have exactly one slack bus")
    for g in net.circuit_groups:
        if g.from_bus == g.to_bus:
            raise NetworkError(f"circuit group {g.label}: self-loop circuit")
        for end in (g.from_bus, g.to_bus):
            if end not in seen:
                raise NetworkError(f"circuit group {g.label}: dangling reference to bus {end}")
        if g.conductor_ref not in net.conductors:
            raise NetworkError(f"circuit group {g.label}: unknown conductor {g.conductor_ref!r}")
        if g.tower_ref not in net.towers:
            raise NetworkError(f"circuit group {g.label}: unknown tower {g.tower_ref!r}")
    for kind, items in (("generator", net.generators), ("load", net.loads)):
        for it in items:
            if it.bus not in seen:
                raise NetworkError(f"{kind} at bus {it.bus}: dangling reference")
    for s in net.scenarios.values():
        for sd in s.shunt_set:
            if sd.bus not in seen:
                raise NetworkError(f"scenario {s.key}: shunt at unknown bus {sd.bus}")
    if not is_connected(net):
        raise NetworkError("disconnected graph")


def load_network(document: str | Path | None = None) -> Network:
    """Read a network description file; ``None`` loads the bundled 17-bus system."""
    if document is None:
        text = resources.files("tepgrid.data").joinpath(BUNDLED_NETWORK).read_text()
        where = BUNDLED_NETWORK
    else:
        where = str(document)
        try:
            text = Path(document).read_text()
        except OSError as e:
            raise NetworkError(f"{where}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkError(f"{where}: parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_network(doc)


# ------------------------------------------------------------ connectivity

def _components(bus_ids, edges) -> int:
    idx = {b: k for k, b in enumerate(bus_ids)}
    n = len(bus_ids)
    if not edges:
        return n
    rows = [idx[a] for a, _ in edges]
    cols = [idx[b] for _, b in edges]
    graph = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return count


def is_connected(net: Network, skip: tuple[int, int] | None = None) -> bool:
    """Connectivity with circuit ``skip = (group_index, circuit_no)`` removed."""
    edges = []
    for gi, g in enumerate(net.circuit_groups):
        n = g.n_circuits - (1 if skip is not None and skip[0] == gi else 0)
        if n > 0:
            edges.append((g.from_bus, g.to_bus))
    return _components(net.bus_ids, edges) == 1


def islanding_outages(net: Network) -> list[str]:
    """Labels of circuit groups whose single-circuit outage splits the graph."""
    return [g.label for gi, g in enumerate(net.circuit_groups) if not is_connected(net, (gi, 1))]


# --------------------------------------------------------------- scenarios

def apply_scenario(net: Network, key: str) -> CaseSpec:
    """Turn a named loading scenario into a concrete solvable case."""
    try:
        sc = net.scenarios[key]
    except KeyError:
        raise KeyError(f"unknown scenario {key!r}") from None
    pos = {b.id: k for k, b in enumerate(net.buses)}
    n = len(net.buses)
    kinds = [b.kind for b in net.buses]
    v_set = [1.0] * n
    for k, b in enumerate(net.buses):
        if b.kind == "slack":
            v_set[k] = sc.slack_voltage
        elif b.kind == "pv":
            v_set[k] = sc.pv_voltage_override if sc.pv_voltage_override is not None else b.v_setpoint

    p_load = [0.0] * n
    q_load = [0.0] * n
    for ld in net.loads:
        p_load[pos[ld.bus]] += ld.p_peak_mw * sc.load_scale
        q_load[pos[ld.bus]] += ld.q_peak_mvar * sc.load_scale

    has_gen = [False] * n
    p_gen = [0.0] * n
    q_min = [-math.inf] * n
    q_max = [math.inf] * n
    limited = [False] * n
    for g in net.generators:
        k = pos[g.bus]
        has_gen[k] = True
        if g.p_peak_mw is None or kinds[k] == "slack":
            continue
        p = g.p_peak_mw * sc.dispatch_scale
        p_gen[k] += p
        if not limited[k]:
            q_min[k] = q_max[k] = 0.0
            limited[k] = True
        q_min[k] += g.lead_factor * p
        q_max[k] += g.lag_factor * p

    shunt = [0.0] * n
    for sd in sc.shunt_set:
        shunt[pos[sd.bus]] += sd.signed_mvar

    zbase = net.nominal_kv ** 2 / net.base_mva
    branches = []
    for gi, g in enumerate(net.circuit_groups):
        pi = net.pi_model(g)
        for c in range(1, g.n_circuits + 1):
            branches.append(Branch(gi, c, g.from_bus, g.to_bus, pi.z_series / zbase,
                                   pi.y_shunt_total * zbase, pi.rating_mva))

    return CaseSpec(
        scenario=key,
        base_mva=net.base_mva,
        bus_ids=net.bus_ids,
        kinds=tuple(kinds),
        v_set=tuple(v_set),
        p_load=tuple(p_load),
        q_load=tuple(q_load),
        has_gen=tuple(has_gen),
        p_gen=tuple(p_gen),
        q_min=tuple(q_min),
        q_max=tuple(q_max),
        shunt_mvar=tuple(shunt),
        branches=tuple(branches),
        group_labels=tuple(g.label for g in net.circuit_groups),
        group_sizes=tuple(g.n_circuits for g in net.circuit_groups),
    )


# -------------------------------------------------------------- validation

def validate_network(net: Network, pf_tol_mvar: float = 0.05) -> list[str]:
    """Check every data invariant; returns human-readable violations (empty if clean)."""
    out = []
    for b in net.buses:
        if b.base_kv <= 0:
            out.append(f"bus {b.id}: base_kv must be positive")
        if b.v_setpoint is not None and not 0.9 <= b.v_setpoint <= 1.1:
            out.append(f"bus {b.id}: v_setpoint {b.v_setpoint} outside [0.9, 1.1]")
    for g in net.circuit_groups:
        if g.length_km <= 0:
            out.append(f"circuit group {g.label}: length must be positive")
        if g.n_circuits not in (1, 2, 3, 4):
            out.append(f"circuit group {g.label}: n_circuits {g.n_circuits} unsupported")
    for gen in net.generators:
        if gen.p_peak_mw is not None and (gen.lag_factor < 0 or gen.lead_factor > 0):
            out.append(f"generator at bus {gen.bus}: Q factors must bracket zero")
        kind = net.bus(gen.bus).kind
        if kind == "pq":
            out.append(f"generator at bus {gen.bus}: attached to a PQ bus")
    for ld in net.loads:
        want = ld.p_peak_mw * math.tan(math.acos(ld.power_factor))
        if abs(ld.q_peak_mvar - want) > pf_tol_mvar:
            out.append(f"load at bus {ld.bus}: Q {ld.q_peak_mvar} Mvar inconsistent with "
                       f"pf {ld.power_factor} (expected {want:.2f})")
    for key, sc in net.scenarios.items():
        if not 0 < sc.load_scale <= 1:
            out.append(f"scenario {key}: load_scale {sc.load_scale} outside (0, 1]")
        if not 0.9 <= sc.slack_voltage <= 1.1:
            out.append(f"scenario {key}: slack voltage {sc.slack_voltage} outside [0.9, 1.1]")
        for sd in sc.shunt_set:
            if sd.mvar_at_nominal <= 0:
                out.append(f"scenario {key}: shunt at bus {sd.bus} must have positive Mvar")
        for kind, total in net.expected_shunt_totals.get(key, {}).items():
            have = sc.shunt_total(kind)
            if abs(have - total) > 1e-9:
                label = "reactor" if kind == "reactor" else "capacitor"
                out.append(f"{key} {label} total {have:g} ≠ {total:g}")
    for gi, g in enumerate(net.circuit_groups):
        if not is_connected(net, (gi, 1)):
            out.append(f"outage of one {g.label} circuit islands the network")
    return out
