"""Solve the three loading scenarios and print the headline figures."""

from tepgrid.network import apply_scenario, load_network
from tepgrid.powerflow import solve, system_summary

net = load_network()
for key in ("peak", "dominant", "light"):
    sol = solve(apply_scenario(net, key))
    s = system_summary(sol)
    print(f"{key:>8}: {sol.iterations} iterations, slack {sol.p_gen[sol.bus_index(1)]:.1f} MW,"
          f" losses {s.losses_mw:.1f} MW")
    print(f"          V range bus {s.v_min[0]} {s.v_min[1]:.3f} .. bus {s.v_max[0]} {s.v_max[1]:.3f}")
    print("          busiest: " + ", ".join(f"{lab} {pct:.2f}%" for lab, pct in s.top_loadings))
    if sol.switched_to_pq:
        print(f"          held at a reactive limit: {sol.switched_to_pq}")
