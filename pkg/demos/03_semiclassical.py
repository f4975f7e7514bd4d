"""Mean-field self-trapping
========================

The semiclassical dimer reduces to three real equations for the total
number N, the imbalance Z and the relative phase. Without losses it has a
sharp self-trapping transition at a critical J/U with a diverging period.
"""
# %%
import math

import numpy as np

from bhdimer import semiclassical as sc

N0, Z0, U = 3.0, 1.0, 0.1
c = sc.critical_ratio(N0, Z0)
print(f"critical J/U for N0={N0}, Z0={Z0}: {c:.6f}")

# %% [markdown]
# The closed-form period agrees with a direct quadrature over the turning
# points. Near the critical point it grows only logarithmically.

# %%
for r in (2.0, 2.9, c - 1e-3, c + 1e-3, 3.5):
    T = sc.oscillation_period(N0, Z0, r, U)
    print(f"J/U={r:.4f}  T={T:9.3f}  quadrature={sc.period_quadrature(N0, Z0, r, U):9.3f}")

# %% [markdown]
# Below the critical point the closed system never crosses Z = 0. Losses
# change that: the trapped oscillation eventually escapes.

# %%
state = sc.SCState(N0, Z0)
closed = sc.integrate(state, sc.SCParams(U=U, J=2.8 * U), 2000)
opened = sc.integrate(state, sc.SCParams(U=U, J=2.8 * U, gamma_eff_L=4e-4, gamma_eff_R=4e-4), 2000)
print("closed t_cross:", sc.crossing_time(closed))
print("open   t_cross:", round(sc.crossing_time(opened), 3))

# %% [markdown]
# The open-system crossover estimate: the first J/U where the imbalance
# averaged over t in [0, 200] falls below 5% of Z0.

# %%
est = sc.crossover_estimate(N0, Z0, U, 4e-4, T=200)
print(f"open-system crossover: {est:.4f} (closed: {c:.4f})")

# %%
for r in np.arange(2.6, 3.21, 0.1):
    z = sc.averaged_imbalance_at(r, N0, Z0, U, 4e-4)
    print(f"J/U={r:.1f}  <Z>_200={z: .4f}")
assert math.isfinite(est)
