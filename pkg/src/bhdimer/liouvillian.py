"""Vectorized Lindbladian and its U(1) gauge-sector blocks.

Vectorization is row-major, ``vec(rho)[k * d + b] = rho[k, b]``, i.e. plain
``rho.reshape(-1)`` in numpy. With this convention ``vec(A rho B) =
kron(A, B.T) @ vec(rho)``. Every module (dynamics, Green's functions) goes
through :func:`vectorize` / :func:`devectorize` so the convention lives here
only.

A vectorized index ``(ket, bra)`` belongs to sector ``nu = N(ket) - N(bra)``.
The Hamiltonian and the single-particle jump terms conserve ``nu``, so the
Lindbladian is block diagonal over sectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List

import numpy as np
import scipy.sparse as sp

from .fock import (
    DimerParams,
    FockBasis,
    SITES,
    annihilation,
    build_hamiltonian,
)

LEAKAGE_TOL = 1e-12


class VectorizationError(RuntimeError):
    """Cross-sector matrix elements found while assembling blocks."""


@dataclass(frozen=True)
class LiouvillianBlock:
    nu: int
    indices: np.ndarray = field(repr=False)  # flat row-major indices into vec(rho)
    pairs: np.ndarray = field(repr=False)  # (n, 2) array of (ket, bra)
    matrix: np.ndarray = field(repr=False)
    dim: int = 0  # Hilbert-space dimension

    @property
    def size(self) -> int:
        return len(self.indices)

    def restrict(self, op_vec: np.ndarray) -> np.ndarray:
        """Components of a full vectorized operator that live in this block."""
        return np.asarray(op_vec)[self.indices]

    def embed(self, block_vec: np.ndarray) -> np.ndarray:
        """Full-length vector with ``block_vec`` placed on this block's pairs."""
        out = np.zeros(self.dim * self.dim, dtype=complex)
        out[self.indices] = block_vec
        return out


def vectorize(op) -> np.ndarray:
    if sp.issparse(op):
        op = op.toarray()
    return np.asarray(op, dtype=complex).reshape(-1)


def devectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vec).reshape(dim, dim)


def sector_labels(basis: FockBasis) -> np.ndarray:
    """Gauge label ``nu`` of every flat vectorized index."""
    n = basis.total_photons
    return (n[:, None] - n[None, :]).reshape(-1)


def sector_sizes(basis: FockBasis) -> dict:
    labels, counts = np.unique(sector_labels(basis), return_counts=True)
    return {int(nu): int(c) for nu, c in zip(labels, counts)}


def _spre(A) -> sp.csr_matrix:
    d = A.shape[0]
    return sp.kron(A, sp.identity(d), format="csr")


def _spost(B) -> sp.csr_matrix:
    d = B.shape[0]
    return sp.kron(sp.identity(d), B.T, format="csr")


def _sprepost(A, B) -> sp.csr_matrix:
    return sp.kron(A, B.T, format="csr")


def hamiltonian_superop(H) -> sp.csr_matrix:
    """Matrix of ``rho -> -i[H, rho]``."""
    H = sp.csr_matrix(H, dtype=complex)
    scale = max(1.0, abs(H).max()) if H.nnz else 1.0
    herm_err = abs(H - H.conj().T).max() if H.nnz else 0.0
    if herm_err > 1e-12 * scale:
        raise ValueError(f"H is not Hermitian (max deviation {herm_err:.3g})")
    return (-1j * (_spre(H) - _spost(H))).tocsr()


def _lindblad_term(c) -> sp.csr_matrix:
    """``c rho c^dag - 1/2 {c^dag c, rho}`` as a superoperator."""
    cd = c.conj().T.tocsr()
    cdc = (cd @ c).tocsr()
    return (_sprepost(c, cd) - 0.5 * (_spre(cdc) + _spost(cdc))).tocsr()


def dissipator_superop(basis: FockBasis, params: DimerParams) -> sp.csr_matrix:
    """Pump/loss dissipator including the overall factor 2.

    The pump term uses the truncated product ``a a^dag`` (not ``n + 1``) so
    that trace preservation is exact inside the truncated space.
    """
    n = basis.dim * basis.dim
    D = sp.csr_matrix((n, n), dtype=complex)
    for site in SITES:
        a = annihilation(basis, site)
        g, p = params.gamma(site), params.pump(site)
        if g:
            D = D + 2.0 * g * _lindblad_term(a)
        if p:
            D = D + 2.0 * p * _lindblad_term(a.conj().T.tocsr())
    return D.tocsr()


def build_liouvillian(basis: FockBasis, params: DimerParams) -> sp.csr_matrix:
    """Full sparse Lindbladian acting on row-major ``vec(rho)``."""
    H = build_hamiltonian(basis, params)
    return (hamiltonian_superop(H) + dissipator_superop(basis, params)).tocsr()


def cross_sector_leakage(L: sp.spmatrix, labels: np.ndarray) -> float:
    coo = L.tocoo()
    off = labels[coo.row] != labels[coo.col]
    return float(np.abs(coo.data[off]).max()) if off.any() else 0.0


def build_blocks(
    basis: FockBasis,
    params: DimerParams,
    sectors: Iterable[int] = (0,),
    L: sp.spmatrix | None = None,
) -> List[LiouvillianBlock]:
    sectors = [int(nu) for nu in sectors]
    nu_max = 2 * basis.cutoff
    bad = [nu for nu in sectors if abs(nu) > nu_max]
    if bad:
        raise ValueError(f"sectors {bad} outside [-{nu_max}, {nu_max}]")
    if L is None:
        L = build_liouvillian(basis, params)
    labels = sector_labels(basis)
    leak = cross_sector_leakage(L, labels)
    if leak > LEAKAGE_TOL:
        raise VectorizationError(f"cross-sector element of size {leak:.3g}")

    L = L.tocsr()
    d = basis.dim
    blocks = []
    for nu in sectors:
        idx = np.flatnonzero(labels == nu)
        sub = L[idx][:, idx].toarray()
        pairs = np.column_stack(np.divmod(idx, d))
        blocks.append(LiouvillianBlock(nu, idx, pairs, sub, d))
    return blocks
