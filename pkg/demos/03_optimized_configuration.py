"""Optimize a configuration at zero dephasing and expose it to dephasing."""

import numpy as np

from excitonnet import ModelParams, eigenstate_report, build_model, make_gamma_grid
from excitonnet import optimize_gamma0, sweep_optimized

params = ModelParams()
# a short search; the full default is 32 restarts x 2e4 evaluations
res = optimize_gamma0(params, master_seed=0, restarts=2, budget=3000)
print(f"best T/T at gamma=0: {res.best_T:.4f} (restart {res.best_restart}, {res.evaluations} evaluations)")
print(np.round(res.best_config.positions, 4))

# near-minimal separations give strong couplings; transfer becomes sink limited
print(eigenstate_report(build_model(res.best_config, params)).format())

grid = make_gamma_grid(1e-5, 1e3, 17)
curve = sweep_optimized(res, grid)
for g, t in zip(curve.gamma_over_sink, curve.transfer):
    print(f"gamma/Gamma={g:10.3g}  T/T={t:.4f}")
