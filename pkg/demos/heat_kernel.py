"""Heat kernel on H^1 by the fiber engine, compared with the closed form."""

import numpy as np

from htlab.fiber import calibration_for, fiber_kernel, heat_closed_form, heat_symbol
from htlab.grid import build_grid
from htlab.group import preset

g = preset("heisenberg-1")
cal = calibration_for(g)
print(f"calibrated c_E={cal.c_E:.12f} c_Z={cal.c_Z:.12f} held-out error {cal.match_error:.1e}")
grid = build_grid(g, 3.0, 3.0, 24, 24, rho_rule="uniform")
for t in (0.1, 0.25, 0.5):
    A = fiber_kernel(g, heat_symbol(t), grid, cal=cal)
    B = heat_closed_form(g, t, grid)
    err = np.max(np.abs(A.values - B.values)) / np.max(np.abs(B.values))
    print(f"t={t:<5} rel sup error {err:.2e}  p_t(0)={A.values[0, 0].real:.6f}")
