"""Atoms on H^1 and the H_{j,n} cancellation ratios for one atom."""

from htlab.atoms import check_atom, hjn_ratio, make_atom
from htlab.group import preset

g = preset("heisenberg-1")
for r in (1.0, 0.5, 0.25):
    a = make_atom(g, r)
    print(f"r={r:<5} L={a.L:<3} checks={check_atom(a, g)} mean={a.stats['mean']:.1e}")
a = make_atom(g, 0.25)
for jL in (-3, -1, 0):
    row = hjn_ratio(g, a, jL - a.L, 0)
    print(f"j+L={jL:<3} n=0 ||a*H||_1={row['l1']:.4f} bound={row['bound']:.4f} ratio={row['ratio']:.3f}")
