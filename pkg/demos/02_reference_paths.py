"""
Reference paths from sparse waypoints
=====================================

Each preset starts as a handful of waypoints, gets densified, split into
equal runs and fitted with quintic segments joined with C2 continuity.
The curvature profile is what the tracking model sees as its disturbance.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cdoblab.paths import densify, fit_path, preset_waypoints, segment_points

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

fig, (ax_xy, ax_rho) = plt.subplots(2, 1, figsize=(8, 6))
for kind in ("single-lane", "double-lane", "avoidance"):
    wps = preset_waypoints(kind)
    dense = densify(wps, 0.5)
    runs = segment_points(dense, 20)
    path = fit_path(runs)
    s, rho = path.curvature_profile(4001)
    x, y, _, _ = path.sample_many(s)
    print(f"{kind:12s} {len(wps)} waypoints -> {len(dense)} dense -> {len(runs)} segments, "
          f"length {path.length:.2f} m, peak curvature {np.abs(rho).max():.4f} 1/m")
    ax_xy.plot(x, y, label=kind)
    ax_rho.plot(s, rho, label=kind)

ax_xy.set_ylabel("y [m]")
ax_xy.legend()
ax_rho.set_xlabel("s [m]")
ax_rho.set_ylabel("curvature [1/m]")
fig.tight_layout()
fig.savefig(out / "paths.svg")
print("wrote", out / "paths.svg")

# A circle arc is a good sanity check for the curvature formula.
R = 50.0
th = np.linspace(0.0, 1.0, 401)
arc = fit_path(segment_points(np.c_[R * np.cos(th), R * np.sin(th)], 8))
_, rho = arc.curvature_profile()
print(f"circle R={R}: curvature relative error {np.abs(rho * R - 1).max():.1e}")
