"""
Choosing PID gains in parameter space
=====================================

Grid (kp, ki, kd), keep the points whose closed-loop poles all sit inside
the D-region (decay rate, damping cone, magnitude cap), and take the
admissible point with the smallest normalized norm. Repeat per speed knot
to get a schedule.
"""

import numpy as np

from cdoblab.controller import (
    DStabilitySpec,
    closed_loop_poles,
    compute_admissible_region,
    design_schedule,
    plant_channel,
    select_gains,
)
from cdoblab.errors import EmptyRegion
from cdoblab.vehicle import SchedulingConfig, VehicleParams

params, sched = VehicleParams(), SchedulingConfig()
spec = DStabilitySpec()
print(f"D-region: Re(p) <= -{spec.sigma}, damping >= {spec.zeta_min}, |p| <= {spec.r_max}")

gn = plant_channel(params, 10.0, sched)
region = compute_admissible_region(gn, spec, V=10.0)
print(f"V = 10 m/s: {region.count} admissible of {region.mask.size} grid points")
g = select_gains(region)
print("selected:", g)
print("closed-loop poles:", np.round(np.sort_complex(closed_loop_poles(gn, g)), 3))

# The plant zeros near -2.8 pull one closed-loop pole toward them, so at low
# speed no gain reaches the decay-rate bound.
for V in (6.0, 8.0):
    try:
        select_gains(compute_admissible_region(plant_channel(params, V, sched), spec, V=V))
    except EmptyRegion:
        print(f"V = {V} m/s: region empty for this D-region")

print(design_schedule(params, sched, spec))
