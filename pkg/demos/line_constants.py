"""Per-km constants of the 500 kV line and how lumping them drifts with length."""

from tepgrid.lines import MILE_KM, equivalent_pi, lumped_distributed_gap
from tepgrid.network import load_network

net = load_network()
geo = net.with_geometry_constants()
g = net.circuit_groups[0]
f = net.frequency_hz

for title, n in (("from tower geometry", geo), ("shipped constants", net)):
    u = n.unit_params(g)
    print(f"{title:>20}: r={u.r_ohm_per_km:.4f} ohm/km  L={u.inductance_mh_per_km(f):.4f} mH/km"
          f"  C={u.capacitance_nf_per_km(f):.3f} nF/km")
print(f"{'rating':>20}: {net.circuit_rating(g):.1f} MVA per circuit")

u = net.unit_params(g)
print("\nmiles   dR%    dX%    dB%")
for miles in (10, 50, 100, 200, 300, 400, 500):
    dr, dx, db = lumped_distributed_gap(u, miles * MILE_KM)
    print(f"{miles:5d} {dr:6.2f} {dx:6.2f} {db:6.2f}")

longest = max(net.circuit_groups, key=lambda c: c.length_km)
pi = equivalent_pi(u, longest.length_km)
print(f"\n{longest.label} ({longest.length_km} km): Z' = {pi.z_series:.3f} ohm, Y' = {pi.y_shunt_total:.3e} S")
