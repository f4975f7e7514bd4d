"""Truncated two-mode Fock space and the dimer Hamiltonian.

States are pairs ``(nL, nR)`` with ``0 <= nL, nR <= cutoff``, ordered
lexicographically, so the dense index is ``nL * (cutoff + 1) + nR``. This is
the same ordering as ``kron(op_L, op_R)``, which is how site operators are
built here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

SITES = ("L", "R")


@dataclass(frozen=True)
class FockBasis:
    cutoff: int
    states: Tuple[Tuple[int, int], ...] = field(repr=False)
    index_of: Dict[Tuple[int, int], int] = field(repr=False, compare=False)
    total_photons: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def mode_dim(self) -> int:
        return self.cutoff + 1

    def occupations(self, site: str) -> np.ndarray:
        col = _site_index(site)
        return np.array([s[col] for s in self.states], dtype=float)

    def fock_state(self, nL: int, nR: int) -> np.ndarray:
        """Dense ket |nL, nR>."""
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index_of[(nL, nR)]] = 1.0
        return psi

    def swap_permutation(self) -> np.ndarray:
        """Index permutation implementing the L<->R relabelling."""
        return np.array([self.index_of[(nR, nL)] for nL, nR in self.states])


@dataclass(frozen=True)
class DimerParams:
    """Hamiltonian and dissipative couplings of the dimer.

    Loss rates ``gamma_*`` and pump rates ``pump_*`` enter the dissipator with
    an overall factor 2, so a single-site field decays at ``gamma - pump``.
    """

    omega0: float = 1.0
    U: float = 0.1
    J: float = 0.0
    gamma_L: float = 3e-4
    gamma_R: float = 3e-4
    pump_L: float = 2e-4
    pump_R: float = 2e-4

    def __post_init__(self):
        for site in SITES:
            g, p = self.gamma(site), self.pump(site)
            if g < 0 or p < 0:
                raise ValueError(f"rates must be non-negative (site {site})")
            if p > 0 and not p < g:
                raise ValueError(
                    f"pump_{site}={p} must be below gamma_{site}={g}"
                )

    @classmethod
    def from_effective(cls, gamma_eff_L, pump_L, gamma_eff_R=None, pump_R=None, **kw):
        """Build from effective losses ``gamma_eff = gamma - pump`` and pumps."""
        if gamma_eff_R is None:
            gamma_eff_R = gamma_eff_L
        if pump_R is None:
            pump_R = pump_L
        return cls(
            gamma_L=gamma_eff_L + pump_L,
            gamma_R=gamma_eff_R + pump_R,
            pump_L=pump_L,
            pump_R=pump_R,
            **kw,
        )

    def gamma(self, site: str) -> float:
        return self.gamma_L if _site_index(site) == 0 else self.gamma_R

    def pump(self, site: str) -> float:
        return self.pump_L if _site_index(site) == 0 else self.pump_R

    def gamma_eff(self, site: str) -> float:
        return self.gamma(site) - self.pump(site)

    @property
    def Gamma(self) -> float:
        return 0.5 * (self.gamma_L + self.gamma_R)

    @property
    def dGamma(self) -> float:
        return self.gamma_L - self.gamma_R

    @property
    def P(self) -> float:
        return 0.5 * (self.pump_L + self.pump_R)

    @property
    def dP(self) -> float:
        return self.pump_L - self.pump_R

    @property
    def gamma_eff_L(self) -> float:
        return self.gamma_L - self.pump_L

    @property
    def gamma_eff_R(self) -> float:
        return self.gamma_R - self.pump_R

    @property
    def is_symmetric(self) -> bool:
        return self.dGamma == 0 and self.dP == 0

    def bare_occupation(self, site: str) -> float:
        """Uncoupled, untruncated steady occupation ``P/(Gamma - P)``."""
        p = self.pump(site)
        return 0.0 if p == 0 else p / self.gamma_eff(site)


def _site_index(site: str) -> int:
    try:
        return SITES.index(site)
    except ValueError:
        raise ValueError(f"site must be 'L' or 'R', got {site!r}") from None


def enumerate_basis(cutoff: int) -> FockBasis:
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValueError(f"cutoff must be an integer >= 1, got {cutoff}")
    cutoff = int(cutoff)
    states = tuple((nL, nR) for nL in range(cutoff + 1) for nR in range(cutoff + 1))
    index_of = {s: k for k, s in enumerate(states)}
    total = np.array([nL + nR for nL, nR in states], dtype=int)
    return FockBasis(cutoff, states, index_of, total)


def _mode_annihilation(d: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr")


def annihilation(basis: FockBasis, site: str) -> sp.csr_matrix:
    """Truncated annihilation operator; transitions above the cutoff are dropped."""
    d = basis.mode_dim
    a = _mode_annihilation(d)
    eye = sp.identity(d, format="csr")
    ops = (a, eye) if _site_index(site) == 0 else (eye, a)
    return sp.kron(*ops, format="csr").astype(complex)


def creation(basis: FockBasis, site: str) -> sp.csr_matrix:
    return annihilation(basis, site).conj().T.tocsr()


def number_operator(basis: FockBasis, site: str) -> sp.csr_matrix:
    return sp.diags(basis.occupations(site).astype(complex), format="csr")


def hopping_operator(basis: FockBasis) -> sp.csr_matrix:
    """``a_L^dag a_R + a_R^dag a_L`` (the kinetic operator divided by J)."""
    aL, aR = annihilation(basis, "L"), annihilation(basis, "R")
    return (aL.conj().T @ aR + aR.conj().T @ aL).tocsr()


def current_operator(basis: FockBasis, J: float) -> sp.csr_matrix:
    """L -> R particle current ``-iJ (a_R^dag a_L - a_L^dag a_R)``."""
    aL, aR = annihilation(basis, "L"), annihilation(basis, "R")
    return (-1j * J * (aR.conj().T @ aL - aL.conj().T @ aR)).tocsr()


def build_hamiltonian(basis: FockBasis, params: DimerParams) -> sp.csr_matrix:
    nL = basis.occupations("L")
    nR = basis.occupations("R")
    diag = params.omega0 * (nL + nR) + params.U * (nL**2 + nR**2)
    H = sp.diags(diag.astype(complex), format="csr")
    if params.J != 0:
        H = H + params.J * hopping_operator(basis)
    return H.tocsr()


def kerr_transition_frequencies(params: DimerParams, n_max: int) -> List[float]:
    """Single-site addition energies ``E(n+1) - E(n) = omega0 + U + 2Un``."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    return [params.omega0 + params.U + 2 * params.U * n for n in range(n_max + 1)]
