"""Spectral functions and sum rules
================================

The steady-state Green's functions are finite sums of complex poles, one per
Liouvillian eigenvalue in the nu = +1 and nu = -1 sectors. This walk-through
builds them, locates the Kerr ladder and checks the sum rules analytically.
"""
# %%
import numpy as np

from bhdimer.fock import DimerParams, enumerate_basis, kerr_transition_frequencies
from bhdimer.greens import (
    all_pole_sums,
    correlation_function,
    spectral_function,
    spectral_peaks,
    spectral_weight_below,
    sum_rules,
)
from bhdimer.spectral import diagonalize, steady_state

basis = enumerate_basis(8)


def prepare(params):
    decomps = diagonalize(basis, params, (0, 1, -1))
    rho = steady_state(decomps[0], basis)
    return rho, all_pole_sums(decomps, rho, basis)


# %% [markdown]
# Small hopping: the left spectral function looks like a single Kerr cavity,
# with lines near omega0 + U + 2 U n. Hopping already splits each line into
# a small multiplet, several times wider than the loss rate.

# %%
p = DimerParams.from_effective(1e-4, 2e-4, U=0.1, J=0.009)
rho, bundle = prepare(p)
A_LL = bundle.retarded[("L", "L")]
omega = np.linspace(0.9, 1.9, 200001)
peaks = spectral_peaks(A_LL, omega, min_height=1.0)
for w in kerr_transition_frequencies(p, 4):
    near = peaks[np.abs(peaks - w) < 0.1]
    print(f"ladder {w:.2f}: peaks at {np.round(near, 4)}")

# %% [markdown]
# Strong hopping moves weight below the bare frequency. The integral is taken
# from the pole sum in closed form, not from the grid.

# %%
q = DimerParams.from_effective(1e-4, 2e-4, U=0.1, J=0.15)
_, strong = prepare(q)
print("weight below omega0 at J/U=1.5:", spectral_weight_below(strong.retarded[("L", "L")], 1.0))

# %% [markdown]
# Sum rules. In a truncated Fock space [a, a^dag] is not the identity, so
# the norm of A differs from 1 by the weight on the top Fock shell. The
# truncation-aware identities hold to round-off.

# %%
report = sum_rules(bundle, p, rho, basis)
for name, row in report.truncation_checks().items():
    print(f"{name:24s} {row['error']:.1e}")
print("ideal norm of A_L:", report.norm["L"])

# %% [markdown]
# With symmetric rates the off-diagonal correlation function is real.

# %%
im = correlation_function(bundle.keldysh[("L", "R")], omega).imag
print("max |Im C_LR|:", np.abs(im).max())
print("A_L >= 0:", spectral_function(A_LL, omega).min() > -1e-10)
