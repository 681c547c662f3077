"""Expansion to a new bus 18: load search on one case, then the cost ranking.

The search uses the lower-bound screening profile, since the strict band
leaves the shipped shunt sets infeasible at every load.
"""

import sys

from tepgrid.compliance import LimitProfile
from tepgrid.network import load_network
from tepgrid.tep import (
    build_tep_case,
    compare_cases,
    load_tep_cases,
    max_deliverable_load,
    reported_result,
    tep_cost,
)

label = sys.argv[1] if len(sys.argv) > 1 else "VI"
cases = load_tep_cases()
spec = cases[label]
expanded = build_tep_case(load_network(), spec)
res = max_deliverable_load(expanded, profile=LimitProfile(check_v_max=False), label=label)
print(f"case {label}: {spec.n_new_circuits} new circuits, {spec.added_circuit_km:.1f} km,"
      f" max load {res.max_load_mw:g} MW, peak losses {res.peak_loss_mw:.1f} MW")
if res.anomaly:
    print("  note:", res.anomaly)
for scen, d in res.digests.items():
    print(f"  {scen:>8}: worst contingency V {d.worst_v:.3f} at bus {d.worst_v_bus} ({d.worst_v_outage})")

print("\nranking from the shipped figures (M$ per MW delivered):")
rows = [tep_cost(cases[k], reported_result(cases[k])) for k in cases]
for c in compare_cases(rows):
    print(f"  {c.label:>3}: total {c.total:9.3f}  avg {c.avg_per_mw:.3f}")
