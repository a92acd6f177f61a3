"""L^1 growth of the wave band kernels K_tau on H^1 (slope near (d-1)/2 = 1)."""

from htlab.group import preset
from htlab.wave import growth_scan

rec = growth_scan(preset("heisenberg-1"), "K_tau", [8, 16, 32, 64])
for tau, l1 in rec.measurements:
    print(f"tau={tau:<5g} ||K_tau||_1 = {l1:.4f}")
print(f"slope {rec.fit.slope:.3f} +- {rec.fit.half_width:.3f}, pass={rec.passed}")
