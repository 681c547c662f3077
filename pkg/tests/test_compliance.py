import json
import logging
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from tepgrid.compliance import (
    LimitProfile,
    check_limits,
    enumerate_contingencies,
    n1_sweep,
    outage_label,
    scenario_sweep,
)
from tepgrid.network import BUNDLED_NETWORK, apply_scenario, parse_network
from tepgrid.powerflow import solve


def _doc():
    return json.loads(resources.files("tepgrid.data").joinpath(BUNDLED_NETWORK).read_text())


def test_peak_normal_is_clean(peak):
    assert check_limits(peak, mode="normal") == []


def test_threshold_semantics(peak):
    vm = peak.vm.copy()
    vm[peak.bus_index(7)] = 0.93
    low = replace(peak, vm=vm)
    normal = check_limits(low, mode="normal")
    assert [(v.kind, v.element) for v in normal] == [("v_min", "bus 7")]
    assert check_limits(low, mode="contingency") == []


def test_overloaded_circuit_named(peak):
    f = peak.flows[4]
    hot = replace(f, rating_mva=abs(f.s_from_mva) / 1.01)
    sol = replace(peak, flows=peak.flows[:4] + (hot,) + peak.flows[5:])
    found = check_limits(sol)
    assert len(found) == 1
    assert found[0].kind == "loading" and found[0].element == f"line {f.label} #{f.circuit}"
    assert found[0].value == pytest.approx(101, rel=1e-9)


def test_over_voltage_can_be_screened_out(peak):
    vm = peak.vm.copy()
    vm[peak.bus_index(5)] = 1.06
    high = replace(peak, vm=vm)
    assert [v.kind for v in check_limits(high)] == ["v_max"]
    assert check_limits(high, LimitProfile(check_v_max=False)) == []


def test_profile_ordering_enforced():
    with pytest.raises(ValueError):
        LimitProfile(v_min_contingency=0.96)
    with pytest.raises(ValueError):
        LimitProfile().v_min("emergency")


def test_bundled_outage_list(net):
    outs = enumerate_contingencies(net)
    assert len(outs) == 24
    assert outs[0].label == "1-2 (1 line)"
    assert outs[-1].label == "15-17 (1 line)"
    assert not any(o.islanding for o in outs)
    assert outage_label(2, 5, 1) == "2-5"


def test_three_group_toy_has_three_outages():
    doc = _doc()
    doc["buses"] = [b for b in doc["buses"] if b["id"] in (1, 2, 3)]
    doc["circuit_groups"] = [
        {"from_bus": 1, "to_bus": 2, "n_circuits": 1, "length_km": 200, "conductor": "macaw", "tower": "h500_4b"},
        {"from_bus": 2, "to_bus": 3, "n_circuits": 1, "length_km": 220, "conductor": "macaw", "tower": "h500_4b"},
        {"from_bus": 1, "to_bus": 3, "n_circuits": 1, "length_km": 250, "conductor": "macaw", "tower": "h500_4b"},
    ]
    doc["generators"] = [g for g in doc["generators"] if g["bus"] in (1, 3)]
    doc["loads"] = [ld for ld in doc["loads"] if ld["bus"] in (2, 3)]
    for sc in doc["scenarios"].values():
        sc["shunts"] = [s for s in sc["shunts"] if s["bus"] in (1, 2, 3)]
    doc["expected_shunt_totals"] = {}
    outs = enumerate_contingencies(parse_network(doc))
    assert [o.label for o in outs] == ["1-2", "2-3", "1-3"]


def test_islanding_outage_flagged_and_skipped(caplog):
    doc = _doc()
    doc["circuit_groups"] = [g for g in doc["circuit_groups"] if {g["from_bus"], g["to_bus"]} != {11, 13}]
    for g in doc["circuit_groups"]:
        if {g["from_bus"], g["to_bus"]} == {13, 16}:
            g["n_circuits"] = 1
    net = parse_network(doc)
    with caplog.at_level(logging.WARNING):
        outs = enumerate_contingencies(net)
    assert [o.label for o in outs if o.islanding] == ["13-16"]
    assert "islands" in caplog.text
    res = n1_sweep(apply_scenario(net, "peak"), outs)
    row = next(r for r in res.rows if r.outage == "13-16")
    assert row.islanding and not row.ok and row.message == "islanding"
    assert len(res.rows) == len(outs)
    assert not any(r.islanding for r in res.rows if r is not row)


def test_peak_sweep_rows(sweep):
    rows = {r.outage: r for r in sweep["peak"].n1.rows}
    r = rows["15-17 (1 line)"]
    assert r.lowest_v_bus == 17 and r.lowest_v == pytest.approx(0.907, abs=0.005)
    r = rows["6-9 (1 line)"]
    assert r.highest_loading_line == "6-9" and r.highest_loading_pct == pytest.approx(53.40, abs=1.5)
    assert all(r.converged for r in rows.values())


def test_light_worst_contingency(sweep):
    d = sweep["light"].n1.digest
    assert d.worst_v == pytest.approx(0.963, abs=0.005)
    assert d.worst_v_outage == "14-17"


# published dominant-load lowest voltages; the 2-3, 5-6 and 5-10 entries repeat
# the peak-load values for those outages and are left out
DOMINANT_LOWEST_V = {
    "1-2 (1 line)": 1.000, "1-4 (1 line)": 0.989, "1-7 (1 line)": 1.000, "2-5": 0.999, "3-6": 1.000,
    "4-8 (1 line)": 0.989, "5-7": 0.989, "6-9 (1 line)": 0.982, "7-11": 0.986, "7-12": 1.000,
    "8-11 (1 line)": 0.998, "9-10": 0.975, "9-15": 0.981, "10-14 (1 line)": 1.000, "11-13": 1.000,
    "12-14 (1 line)": 0.994, "12-16 (1 line)": 0.999, "13-16 (1 line)": 0.995, "14-15": 1.000,
    "14-17": 0.955, "15-17 (1 line)": 0.969,
}


def test_dominant_rows_close_to_reported(sweep):
    rows = {r.outage: r for r in sweep["dominant"].n1.rows}
    for label, v in DOMINANT_LOWEST_V.items():
        assert rows[label].lowest_v == pytest.approx(v, abs=0.01), label


def test_digest_matches_rows(sweep):
    for rep in sweep.scenarios:
        rows = [r for r in rep.n1.rows if r.converged]
        d = rep.n1.digest
        assert d.worst_v == min(r.lowest_v for r in rows)
        assert d.worst_loading_pct == max(r.highest_loading_pct for r in rows)
        assert d.n_rows == 24 and d.n_failed == sum(not r.ok for r in rep.n1.rows)


def test_outages_never_raise_the_lowest_voltage(sweep):
    for rep in sweep.scenarios:
        base_low = float(np.min(rep.normal.vm))
        for r in rep.n1.rows:
            assert r.lowest_v <= base_low + 1e-6, (rep.scenario, r.outage)


def test_parallel_circuits_are_interchangeable(peak_case, peak):
    gi = next(i for i, n in enumerate(peak_case.group_sizes) if n == 2)
    a = solve(peak_case.without_circuit(gi, 1), initial=peak)
    b = solve(peak_case.without_circuit(gi, 2), initial=peak)
    assert np.allclose(a.vm, b.vm, atol=1e-12) and np.allclose(a.va_deg, b.va_deg, atol=1e-10)


def test_parallel_sweep_matches_serial(net, peak_case):
    outs = enumerate_contingencies(net)
    serial = n1_sweep(peak_case, outs)
    pooled = n1_sweep(peak_case, outs, jobs=2)
    assert serial == pooled


def test_rows_follow_declaration_order(net, sweep):
    labels = [r.outage for r in sweep["peak"].n1.rows]
    assert [lab.split()[0] for lab in labels] == [g.label for g in net.circuit_groups]


def test_empty_sweep_is_vacuous(net):
    rep = scenario_sweep(net, [])
    assert rep.scenarios == () and rep.ok


def test_light_without_reactors_over_voltage():
    doc = _doc()
    doc["scenarios"]["light"]["shunts"] = []
    doc["expected_shunt_totals"] = {}
    rep = scenario_sweep(parse_network(doc), ["light"])["light"]
    assert not rep.ok
    kinds = {v.kind for v in rep.normal_violations}
    assert "v_max" in kinds or not rep.normal.converged
