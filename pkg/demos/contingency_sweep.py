"""Single-circuit outage sweep at each loading level.

Run with ``--screen`` to skip the upper voltage bound.
"""

import sys

from tepgrid.compliance import LimitProfile, scenario_sweep
from tepgrid.network import load_network

profile = LimitProfile(check_v_max="--screen" not in sys.argv)
rep = scenario_sweep(load_network(), ["peak", "dominant", "light"], profile=profile)
for s in rep.scenarios:
    d = s.n1.digest
    print(f"{s.scenario:>8}: worst V {d.worst_v:.3f} at bus {d.worst_v_bus} ({d.worst_v_outage}),"
          f" worst loading {d.worst_loading_pct:.2f}% on {d.worst_loading_line} ({d.worst_loading_outage}),"
          f" {d.n_failed}/{d.n_rows} outages flagged")
    for r in s.n1.rows:
        if r.violations:
            print(f"          {r.outage}: " + ", ".join(map(str, r.violations)))
print("compliant" if rep.ok else "not compliant")
