"""A small Monte Carlo landscape: median, minimum and the dephasing line."""

import numpy as np

from excitonnet import ModelParams, make_gamma_grid, reference_lines, run_landscape, summarize

params = ModelParams()          # 7 sites, in/out on the poles of a unit-diameter ball
grid = make_gamma_grid(1e-5, 1e3, 25)
land = run_landscape(params, grid, n_samples=2000, master_seed=0)
s = summarize(land)
t_deph, _ = reference_lines(grid)

print(" gamma/Gamma    median/T    min/T   T_deph/T  coherent")
for g, med, mn, td, coh in zip(grid.values, s.median, s.minimum, t_deph, land.coherent):
    print(f"{g:10.3g}  {med:10.4g}  {mn:8.4g}  {td:9.3g}  {coh:6d}")

k = int(np.nanargmin(s.median))
print(f"median is smallest at gamma = {grid.values[k]:.3g} Gamma: {s.median[k]:.3f} T")

# high dephasing: Zeno-like freezing, slope of log median vs log gamma
sel = grid.values >= 1e2
print("Zeno slope", np.polyfit(np.log(grid.values[sel]), np.log(s.median[sel]), 1)[0])
