"""Checking the engine against the U = 0 closed forms
===================================================

At U = 0 the dimer is linear and its Green's functions are known exactly.
This is the most direct external check of the pole-sum machinery. It also
shows how the Fock cutoff limits accuracy once occupations grow.
"""
# %%
import numpy as np

from bhdimer import oracle_u0 as u0
from bhdimer.fock import DimerParams, enumerate_basis
from bhdimer.greens import correlation_function, greens_pole_sum, spectral_function
from bhdimer.spectral import IllConditionedSpectrumError, diagonalize, steady_state

J = 0.15
omega = np.linspace(0.7, 1.3, 2001)
print("cutoff  n      max|dA|    max|dC|")
for cutoff in (6, 8, 10):
    basis = enumerate_basis(cutoff)
    for n in (0.05, 0.5):
        p = DimerParams.from_effective(1e-3, n * 1e-3, U=0.0, J=J)
        ref = u0.U0Params.from_dimer(p)
        try:
            decomps = diagonalize(basis, p, (0, 1, -1))
        except IllConditionedSpectrumError as exc:
            # U = 0 is a degenerate, nearly defective spectrum; large cutoffs
            # are refused rather than returning unreliable eigenvectors
            print(f"{cutoff:5d}  {n:4.2f}  refused: {exc}")
            continue
        rho = steady_state(decomps[0], basis)
        A = spectral_function(greens_pole_sum(decomps, rho, basis, "L", "L"), omega)
        C = correlation_function(greens_pole_sum(decomps, rho, basis, "L", "L", "keldysh"), omega).real
        dA = np.abs(A - u0.spectral_function(ref, J, omega)).max()
        dC = np.abs(C - u0.correlation_function(ref, J, omega)).max()
        print(f"{cutoff:5d}  {n:4.2f}  {dA:9.2e}  {dC:9.2e}")

# %% [markdown]
# Closed-form occupations in two limits: strongly coupled sites share the
# loss-weighted mean occupation, and a lossless right site inherits the left
# one.

# %%
asym = u0.U0Params(1.0, 1.0, 6e-2, 2e-2, 4e-2, 1e-2)
print("strong J:", u0.u0_occupations(asym, 10.0, "strong_J"))
print("J = 1e3 from the Keldysh integral:", [u0.occupation_from_keldysh(asym, 1e3, s) for s in "LR"])
lossless = u0.lossless_right_params(2e-4, 1e-4)
print("lossless right site:", [u0.occupation_from_keldysh(lossless, 0.01, s) for s in "LR"])
