"""Closed-form Green's functions and occupations of the non-interacting dimer.

These are exact for ``U = 0`` and an untruncated Fock space, and serve as
independent references for the exact-diagonalization engine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import DimerParams

LOSSLESS_EPS = 1e-8


@dataclass(frozen=True)
class U0Params:
    omega_L: float
    omega_R: float
    gamma_L: float
    gamma_R: float
    pump_L: float
    pump_R: float
    allow_lossless: bool = False

    def __post_init__(self):
        for s in "LR":
            if self.gamma_minus(s) <= 0 and not self.allow_lossless:
                raise ValueError(f"gamma_{s} - pump_{s} must be positive")

    @classmethod
    def from_dimer(cls, p: DimerParams, omega_R=None, allow_lossless=False) -> "U0Params":
        return cls(
            p.omega0,
            p.omega0 if omega_R is None else omega_R,
            p.gamma_L,
            p.gamma_R,
            p.pump_L,
            p.pump_R,
            allow_lossless,
        )

    def omega(self, s):
        return self.omega_L if s == "L" else self.omega_R

    def gamma_minus(self, s):
        return (self.gamma_L - self.pump_L) if s == "L" else (self.gamma_R - self.pump_R)

    def gamma_plus(self, s):
        return (self.gamma_L + self.pump_L) if s == "L" else (self.gamma_R + self.pump_R)

    def bare_occupation(self, s):
        pump = self.pump_L if s == "L" else self.pump_R
        return 0.0 if pump == 0 else pump / self.gamma_minus(s)


def _other(site):
    if site not in ("L", "R"):
        raise ValueError(f"site must be 'L' or 'R', got {site!r}")
    return "R" if site == "L" else "L"


def single_cavity_gf(omega0, gamma, pump, omega):
    """Retarded and Keldysh functions of one pumped, lossy mode."""
    om = np.asarray(omega, dtype=float)
    gm, gp = gamma - pump, gamma + pump
    gr = 1.0 / (om - omega0 + 1j * gm)
    gk = -2j * gp / ((om - omega0) ** 2 + gm**2)
    return gr, gk


def coupled_gf(params: U0Params, J: float, omega, site: str = "L"):
    """Retarded and Keldysh functions of one site of the coupled dimer.

    The Keldysh part is ``G^R Sigma^K G^A`` with the other site's bath dressed
    by its bare propagator: the bracket carries ``J^2 Gamma_+ / (Delta^2 +
    Gamma_-^2)`` with ``Delta = omega - omega_other``.
    """
    o = _other(site)
    om = np.asarray(omega, dtype=float)
    d_s, d_o = om - params.omega(site), om - params.omega(o)
    gm_s, gm_o = params.gamma_minus(site), params.gamma_minus(o)
    gr = 1.0 / (d_s + 1j * gm_s - J**2 / (d_o + 1j * gm_o))
    bath = params.gamma_plus(site) + J**2 * params.gamma_plus(o) / (d_o**2 + gm_o**2)
    gk = -2j * bath * np.abs(gr) ** 2
    return gr, gk


def spectral_function(params: U0Params, J, omega, site="L"):
    return -coupled_gf(params, J, omega, site)[0].imag / np.pi


def correlation_function(params: U0Params, J, omega, site="L"):
    return (1j * coupled_gf(params, J, omega, site)[1] / (2 * np.pi)).real


def hybridized_frequencies(params: U0Params, J: float):
    """Zeros of the real part of the coupled denominator, ``(omega_-, omega_+)``."""
    mean = 0.5 * (params.omega_L + params.omega_R)
    half = np.sqrt(
        (0.5 * (params.omega_L - params.omega_R)) ** 2
        + J**2
        + params.gamma_minus("L") * params.gamma_minus("R")
    )
    return mean - half, mean + half


def retarded_poles(params: U0Params, J: float) -> np.ndarray:
    """Complex poles of the site Green's function (lower half-plane)."""
    zl = params.omega_L - 1j * params.gamma_minus("L")
    zr = params.omega_R - 1j * params.gamma_minus("R")
    # (w - zl)(w - zr) - J^2 = 0
    return np.roots([1.0, -(zl + zr), zl * zr - J**2])


def integrated_correlation(params: U0Params, J: float, site: str = "L") -> float:
    """Exact ``int C_site(omega) d omega`` by residues in the upper half-plane."""
    o = _other(site)
    gp_s, gp_o = params.gamma_plus(site), params.gamma_plus(o)
    gm_o, w_o = params.gamma_minus(o), params.omega(o)

    def numer(z):
        return gp_s * ((z - w_o) ** 2 + gm_o**2) + J**2 * gp_o

    z1, z2 = retarded_poles(params, J)
    u1, u2 = np.conj(z1), np.conj(z2)
    if abs(u1 - u2) < 1e-12 * max(1.0, abs(u1)):
        raise ValueError("coalescing poles; use a slightly different J")
    # integrand numer / (pi (w-z1)(w-z2)(w-u1)(w-u2))
    res1 = numer(u1) / ((u1 - z1) * (u1 - z2) * (u1 - u2))
    res2 = numer(u2) / ((u2 - z1) * (u2 - z2) * (u2 - u1))
    return float((2j * np.pi * (res1 + res2) / np.pi).real)


def occupation_from_keldysh(params: U0Params, J: float, site: str = "L") -> float:
    return 0.5 * (integrated_correlation(params, J, site) - 1.0)


def u0_occupations(params: U0Params, J: float, regime: str):
    """Limiting steady occupations ``(n_L, n_R)``.

    ``uncoupled``: bare values. ``strong_J``: loss-weighted mean, valid for
    equal frequencies and ``J`` far above every rate. ``lossless_right``:
    the right site has no bath (regularized as ``P_R = 0``, ``Gamma_R -> 0``)
    and both sites take the left bare occupation.
    """
    if regime == "uncoupled":
        return params.bare_occupation("L"), params.bare_occupation("R")
    if regime == "strong_J":
        rates = max(params.gamma_plus("L"), params.gamma_plus("R"))
        if params.omega_L != params.omega_R:
            raise ValueError("strong_J regime needs omega_L == omega_R")
        if not abs(J) >= 100 * rates:
            raise ValueError(f"strong_J regime needs J >> rates (J={J}, rates~{rates})")
        gl, gr = params.gamma_minus("L"), params.gamma_minus("R")
        n = (gl * params.bare_occupation("L") + gr * params.bare_occupation("R")) / (gl + gr)
        return n, n
    if regime == "lossless_right":
        if params.pump_R != 0 or params.gamma_R > 1e-6:
            raise ValueError("lossless_right regime needs pump_R = 0 and gamma_R ~ 0")
        if J == 0:
            raise ValueError("lossless_right regime needs J != 0")
        n = params.bare_occupation("L")
        return n, n
    raise ValueError(f"unknown regime {regime!r}")


def lossless_right_params(gamma_L, pump_L, omega0=1.0, eps=LOSSLESS_EPS) -> U0Params:
    """Right site regularized as ``P_R = 0``, ``Gamma_R = eps``."""
    return U0Params(omega0, omega0, gamma_L, eps, pump_L, 0.0)
