"""
Why the standard observer fails on curved paths
===============================================

The standard observer treats everything the nominal steering model does not
explain as delay-induced disturbance and cancels it from the feedback. The
path curvature is such a term, so the controller never sees the curvature
response and the vehicle drifts off the path. The modified observer adds the
known curvature response back.
"""

import numpy as np

from cdoblab import sim

scn = sim.Scenario(path="avoidance", controller="pid-cdob-standard", tau=0.0)
std = sim.run_scenario(scn)
mod = sim.run_scenario(sim.Scenario(path="avoidance", controller="pid-cdob-modified", tau=0.0))
print(f"max |ey|: standard {std.metrics.max_abs_ey:.3f} m, modified {mod.metrics.max_abs_ey:.3f} m")

# The standard feedback equals the true error minus the curvature response d,
# up to (1 - Q) d, which is about 1.414/omega_c times the rate of change of d.
d = sim.curvature_response(std, scn, 1e-3)
resid = np.abs(std["ycomp"] - (std["ey"] - d))
t = std["t"]
print(f"|y_comp - (ey - d)|: max after 0.5 s {resid[t >= 0.5].max():.2e} m, "
      f"median {np.median(resid[t >= 0.5]):.2e} m, after the maneuver {resid[t >= 5.5].max():.2e} m")
ddot = np.gradient(d, 1e-3)
print(f"predicted peak from 1.4142/omega_c * |d'|: {(1.4142 / 1001.583 * np.abs(ddot))[t >= 0.5].max():.2e} m")
