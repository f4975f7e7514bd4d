"""Engine invariants evaluated on a concrete basis and parameter set."""
from __future__ import annotations

from typing import Dict, Sequence

import numpy as np

from .fock import DimerParams, FockBasis, build_hamiltonian
from .greens import all_pole_sums, sum_rules
from .liouvillian import build_liouvillian, cross_sector_leakage, sector_labels, sector_sizes, vectorize
from .spectral import DensityMatrix, diagonalize, evolve, evolve_direct_oracle, steady_state

DIRECT_ORACLE_MAX_BLOCK = 300  # nu=0 size up to which the ODE oracle runs


def _row(value: float, limit: float) -> dict:
    value = float(value)
    return {"value": value, "limit": float(limit), "passed": bool(value <= limit)}


def invariant_report(
    basis: FockBasis, params: DimerParams, initial_state: Sequence[int] = (1, 0)
) -> Dict[str, dict]:
    """Each invariant as ``{value, limit, passed}``; smaller values are better."""
    rows: Dict[str, dict] = {}
    H = build_hamiltonian(basis, params)
    rows["hamiltonian_hermiticity"] = _row(abs(H - H.conj().T).max(), 1e-12)

    L = build_liouvillian(basis, params)
    rows["sector_leakage"] = _row(cross_sector_leakage(L, sector_labels(basis)), 1e-12)
    left_vacuum = vectorize(np.eye(basis.dim))
    rows["trace_preservation"] = _row(np.abs(L.T @ left_vacuum).max(), 1e-12)

    decomps = diagonalize(basis, params, (0, 1, -1))
    rows["biorthogonality_residual"] = _row(max(d.condition_report for d in decomps.values()), 1e-8)
    rows["max_eigenvalue_real_part"] = _row(
        max(float(d.eigenvalues.real.max()) for d in decomps.values()), 1e-10
    )

    rho = steady_state(decomps[0], basis)
    evals = np.linalg.eigvalsh(rho.matrix)
    rows["steady_state_negativity"] = _row(max(0.0, -evals.min()), 1e-8)
    rows["steady_state_residual"] = _row(np.abs(L @ vectorize(rho.matrix)).max(), 1e-10)

    report = sum_rules(all_pole_sums(decomps, rho, basis), params, rho, basis)
    for name, r in report.truncation_checks().items():
        rows[f"sum_rule_{name}"] = {"value": r["error"], "limit": 1e-8, "passed": r["passed"]}

    if sector_sizes(basis)[0] <= DIRECT_ORACLE_MAX_BLOCK:
        rate = max(params.gamma_eff_L, params.gamma_eff_R, 1e-6)
        times = np.linspace(0.0, 2.0 / rate, 101)
        rho0 = DensityMatrix.fock(basis, *initial_state)
        a = evolve(decomps[0], rho0, times, basis)
        b = evolve_direct_oracle(L, rho0, times, basis)
        err = max(np.abs(a.n_L - b.n_L).max(), np.abs(a.n_R - b.n_R).max())
        rows["spectral_vs_direct_evolution"] = _row(err, 1e-6)
    return rows
