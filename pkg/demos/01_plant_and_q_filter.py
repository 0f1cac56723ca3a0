"""
The tracking plant and the Q filter
===================================

Build the lateral tracking model at 10 m/s, pull out the steering-to-error
channel and check the two properties the observer needs from it: the plant
has to be minimum phase, and Q has to roll off at least as fast as the plant.
"""

import numpy as np

from cdoblab.cdob import design_q, nominal_channels
from cdoblab.signals import poles_zeros, proper_inverse_product
from cdoblab.vehicle import SchedulingConfig, VehicleParams, build_tracking_model, preview_distance

params = VehicleParams()
V = 10.0
ls = preview_distance(V, SchedulingConfig())
model = build_tracking_model(params, V, ls)
print(f"V = {V} m/s, preview ls = {ls} m")
print("A =\n", np.array2string(model.A, precision=4, suppress_small=True))

# Steering -> ey has a double integrator (heading and lateral offset) on top
# of the two lateral modes.
gn, grho = nominal_channels(model)
poles, zeros = poles_zeros(gn)
print("Gn poles:", np.round(poles, 4))
print("Gn zeros:", np.round(zeros, 4), "(all in the left half plane)")
print("relative degree:", gn.relative_degree)

# The open-loop lateral dynamics lose stability above the critical speed,
# which is why every scenario stays below 15 m/s.
print(f"critical speed: {params.critical_speed():.2f} m/s")

# Q from the passband / stopband template. The cutoff uses the unrounded
# order, which gives 1001.6 rad/s; a rounded order of 2 would give 1001.2.
q = design_q()
print(f"Q: n_raw = {q.n_raw:.4f}, order = {q.order}, omega_c = {q.omega_c:.1f} rad/s")

# Q / Gn is biproper, so it can be discretized and run sample by sample.
qg = proper_inverse_product(q.tf, gn)
print("Q/Gn numerator degree", len(qg.num) - 1, "denominator degree", len(qg.den) - 1)

w = np.array([1.0, 10.0, 100.0, 1000.0, 10000.0])
print("|Q(jw)| in dB at", w, ":", np.round(20 * np.log10(np.abs(q.tf.freqresp(w))), 2))
