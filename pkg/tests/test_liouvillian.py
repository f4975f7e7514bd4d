import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from bhdimer.fock import DimerParams, annihilation, build_hamiltonian, enumerate_basis
from bhdimer.liouvillian import (
    VectorizationError,
    build_blocks,
    build_liouvillian,
    devectorize,
    dissipator_superop,
    hamiltonian_superop,
    sector_labels,
    sector_sizes,
    vectorize,
)

rng = np.random.default_rng(7)


def _random_matrix(d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def test_vectorization_identity():
    d = 5
    A, B, rho = _random_matrix(d), _random_matrix(d), _random_matrix(d)
    lhs = vectorize(A @ rho @ B)
    rhs = np.kron(A, B.T) @ vectorize(rho)
    assert np.allclose(lhs, rhs)
    assert np.array_equal(devectorize(vectorize(rho), d), rho)


def test_commuting_diagonals_give_zero():
    H = sp.diags([0.0, 1.0, 2.5])
    rho = np.diag([0.2, 0.3, 0.5])
    assert np.abs(hamiltonian_superop(H) @ vectorize(rho)).max() == 0


def test_coherence_rotates_at_omega0():
    omega0 = 1.7
    H = sp.diags([0.0, omega0])  # single mode, cutoff 1
    coh = np.array([[0, 1], [0, 0]], dtype=complex).T  # |1><0|
    out = devectorize(hamiltonian_superop(H) @ vectorize(coh), 2)
    assert out[1, 0] == pytest.approx(-1j * omega0)
    assert np.count_nonzero(out) == 1


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(ValueError):
        hamiltonian_superop(sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])))


def test_vacuum_is_dark_for_pure_loss():
    b = enumerate_basis(3)
    p = DimerParams(gamma_L=3e-4, gamma_R=1e-4, pump_L=0.0, pump_R=0.0)
    vac = vectorize(np.outer(b.fock_state(0, 0), b.fock_state(0, 0)))
    assert np.abs(dissipator_superop(b, p) @ vac).max() == 0


def test_single_photon_decays_at_twice_gamma():
    b = enumerate_basis(2)
    g = 3e-4
    p = DimerParams(J=0.0, gamma_L=g, gamma_R=0.0, pump_L=0.0, pump_R=0.0)
    rho = np.outer(b.fock_state(1, 0), b.fock_state(1, 0))
    drho = devectorize(build_liouvillian(b, p) @ vectorize(rho), b.dim)
    nL = annihilation(b, "L").conj().T @ annihilation(b, "L")
    assert np.trace(nL @ drho).real == pytest.approx(-2 * g, rel=1e-12)


@pytest.mark.parametrize("cutoff", [1, 3])
def test_trace_preservation(cutoff):
    b = enumerate_basis(cutoff)
    p = DimerParams(U=0.3, J=0.2, gamma_L=5e-2, gamma_R=1e-2, pump_L=2e-2, pump_R=5e-3)
    left = vectorize(np.eye(b.dim))
    H = build_hamiltonian(b, p)
    for S in (hamiltonian_superop(H), dissipator_superop(b, p), build_liouvillian(b, p)):
        assert np.abs(S.T @ left).max() < 1e-12


def test_cutoff_one_sector_sizes():
    sizes = sector_sizes(enumerate_basis(1))
    assert sizes == {-2: 1, -1: 4, 0: 6, 1: 4, 2: 1}
    assert sum(sizes.values()) == 16


@pytest.mark.parametrize("cutoff", [1, 2, 4, 8])
def test_sector_zero_size_formula(cutoff):
    d = [min(n, 2 * cutoff - n) + 1 for n in range(2 * cutoff + 1)]
    sizes = sector_sizes(enumerate_basis(cutoff))
    assert sizes[0] == sum(x * x for x in d)
    assert sum(sizes.values()) == (cutoff + 1) ** 4


def test_blocks_conjugate_under_transposition():
    b = enumerate_basis(2)
    p = DimerParams(U=0.2, J=0.15, gamma_L=4e-2, gamma_R=1e-2, pump_L=1e-2, pump_R=5e-3)
    plus, minus = build_blocks(b, p, (1, -1))
    pos = {tuple(pr): k for k, pr in enumerate(minus.pairs)}
    perm = [pos[(bra, ket)] for ket, bra in plus.pairs]
    assert np.allclose(plus.matrix, np.conj(minus.matrix[np.ix_(perm, perm)]))


def test_block_out_of_range():
    with pytest.raises(ValueError):
        build_blocks(enumerate_basis(1), DimerParams(), (3,))


def test_cross_sector_leakage_detected():
    b = enumerate_basis(1)
    p = DimerParams()
    L = build_liouvillian(b, p).tolil()
    labels = sector_labels(b)
    i = int(np.flatnonzero(labels == 0)[0])
    j = int(np.flatnonzero(labels == 1)[0])
    L[i, j] = 1e-6
    with pytest.raises(VectorizationError):
        build_blocks(b, p, (0,), L=L.tocsr())


def test_blocks_tile_full_liouvillian():
    b = enumerate_basis(2)
    p = DimerParams(U=0.1, J=0.05)
    L = build_liouvillian(b, p).toarray()
    rebuilt = np.zeros_like(L)
    for blk in build_blocks(b, p, range(-4, 5)):
        rebuilt[np.ix_(blk.indices, blk.indices)] = blk.matrix
    assert np.array_equal(rebuilt, L)


@settings(max_examples=15, deadline=None)
@given(
    cutoff=st.integers(1, 3),
    U=st.floats(0.0, 0.5),
    J=st.floats(0.0, 0.5),
    gL=st.floats(1e-3, 1e-1),
    gR=st.floats(1e-3, 1e-1),
    xL=st.floats(0.0, 0.9),
    xR=st.floats(0.0, 0.9),
)
def test_spectral_stability_and_pairing(cutoff, U, J, gL, gR, xL, xR):
    p = DimerParams(U=U, J=J, gamma_L=gL, gamma_R=gR, pump_L=xL * gL, pump_R=xR * gR)
    b = enumerate_basis(cutoff)
    blocks = build_blocks(b, p, (0, 1, -1))
    ev = {blk.nu: np.linalg.eigvals(blk.matrix) for blk in blocks}
    for w in ev.values():
        assert w.real.max() <= 1e-10
    dist = np.abs(ev[1][:, None] - np.conj(ev[-1])[None, :])
    assert dist.min(axis=1).max() < 1e-9 and dist.min(axis=0).max() < 1e-9
    left = vectorize(np.eye(b.dim))
    assert np.abs(build_liouvillian(b, p).T @ left).max() < 1e-12
