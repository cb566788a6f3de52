"""Bare dimer: the closed form, the linear-solve path and two time-domain oracles."""

import numpy as np

from excitonnet import Configuration, ModelParams, build_liouvillian, build_model
from excitonnet import evolve_oracle, transfer_time, two_site_transfer_time

params = ModelParams(n_sites=2)
dimer = build_model(Configuration([[0, 0, 0.5], [0, 0, -0.5]]), params)
print("coupling", dimer.couplings[0, 1], " T =", dimer.direct_time, " Gamma =", dimer.sink_rate)

# 2/Gamma + Gamma/(4 v^2) + 2 gamma / v^2, in units of T
for ratio in (0.0, 0.1, 1.0, 10.0):
    gamma = ratio * dimer.sink_rate
    L = build_liouvillian(dimer, gamma)
    exact = two_site_transfer_time(1.0, dimer.sink_rate, gamma) / dimer.direct_time
    print(f"gamma/Gamma={ratio:5}  solve={transfer_time(L).transfer_time:.15f}  exact={exact:.15f}")

# time domain at zero dephasing: adaptive RK and exact exponential panels
L = build_liouvillian(dimer, 0.0)
rk = evolve_oracle(L, 5.0, 1e-11, trace_floor=1e-13)
prop = evolve_oracle(L, 5.0, method="propagator", trace_floor=1e-15)
print("dopri5    ", rk.transfer_time, "steps", rk.n_steps)
print("propagator", prop.transfer_time, "panels", prop.n_steps)

# populations: excitation sloshes to "out" and leaks into the sink
for k in range(0, len(prop.times), 16):
    t = prop.times[k] / dimer.direct_time
    pops = np.diag(prop.states[k]).real
    print(f"t/T={t:8.4f}  p_in={pops[0]:.4f}  p_out={pops[1]:.4f}  sink={prop.ground[k]:.4f}")
