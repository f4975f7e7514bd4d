"""Exact diagonalization of Liouvillian blocks, steady states and dynamics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .fock import DimerParams, FockBasis, SITES
from .liouvillian import (
    LiouvillianBlock,
    build_blocks,
    build_liouvillian,
    devectorize,
    sector_labels,
    vectorize,
)

BIORTH_ERROR_TOL = 1e-6
ZERO_MODE_REL_TOL = 1e-9


class IllConditionedSpectrumError(RuntimeError):
    pass


class DegenerateSteadyStateError(RuntimeError):
    pass


class StiffnessError(RuntimeError):
    pass


class FitRejectedError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigensystem of one block with ``left @ right == I``.

    ``right[:, a]`` is |r_a> and ``left[a, :]`` is <l_a| restricted to the
    block's pairs. For ``nu == 0`` the zero mode is stored at ``zero_mode``
    with ``r`` normalized to unit trace, which makes its left vector the
    vectorized identity.
    """

    nu: int
    eigenvalues: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    block: LiouvillianBlock = field(repr=False)
    condition_report: float = 0.0
    zero_mode: Optional[int] = None

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def validate(self, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8) -> "DensityMatrix":
        m = self.matrix
        if np.abs(m - m.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > trace_tol:
            raise ValueError(f"density matrix trace is {np.trace(m)}")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
        if lo < -pos_tol:
            raise ValueError(f"density matrix has eigenvalue {lo:.3g}")
        return self

    def expect(self, op) -> complex:
        if sp.issparse(op):
            return complex((op.multiply(self.matrix.T)).sum())
        return complex(np.trace(np.asarray(op) @ self.matrix))

    def occupations(self, basis: FockBasis) -> Tuple[float, float]:
        diag = self.matrix.diagonal().real
        return tuple(float(diag @ basis.occupations(s)) for s in SITES)

    def trace_distance(self, other: "DensityMatrix") -> float:
        ev = np.linalg.eigvalsh(self.matrix - other.matrix)
        return 0.5 * float(np.abs(ev).sum())

    @classmethod
    def fock(cls, basis: FockBasis, nL: int, nR: int) -> "DensityMatrix":
        psi = basis.fock_state(nL, nR)
        return cls(np.outer(psi, psi.conj()))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    n_L: np.ndarray
    n_R: np.ndarray

    @property
    def Z(self) -> np.ndarray:
        return self.n_L - self.n_R

    @property
    def N(self) -> np.ndarray:
        return self.n_L + self.n_R

    @property
    def observables(self) -> Dict[str, np.ndarray]:
        return {"n_L": self.n_L, "n_R": self.n_R, "Z": self.Z, "N": self.N}


@dataclass(frozen=True)
class ImbalanceMetrics:
    time_averaged_Z: float
    late_decay_rate: float


def diagonalize_block(block: LiouvillianBlock) -> SpectralDecomposition:
    """Full eigendecomposition of a dense block.

    Left vectors are the rows of ``inv(right)``, which bi-normalizes them
    against the right vectors, degenerate clusters included, without a second
    eigensolve.
    """
    M = block.matrix
    w, R = la.eig(M, overwrite_a=False, check_finite=False)
    Lrows = la.solve(R, np.eye(len(w), dtype=complex), check_finite=False)
    resid = float(np.abs(Lrows @ R - np.eye(len(w))).max()) if len(w) else 0.0
    if resid > BIORTH_ERROR_TOL:
        raise IllConditionedSpectrumError(
            f"bi-orthogonality residual {resid:.3g} in sector {block.nu}"
        )

    zero = None
    if block.nu == 0:
        zero = _find_zero_mode(w)
        trace_rows = block.pairs[:, 0] == block.pairs[:, 1]
        tr = R[trace_rows, zero].sum()
        R[:, zero] /= tr
        Lrows[zero, :] *= tr
    return SpectralDecomposition(block.nu, w, R, Lrows, block, resid, zero)


def _find_zero_mode(w: np.ndarray) -> int:
    mags = np.abs(w)
    order = np.argsort(mags)
    tol = ZERO_MODE_REL_TOL * max(mags.max(), 1e-300)
    if mags[order[0]] >= tol:
        raise DegenerateSteadyStateError(
            f"no zero mode: smallest |eigenvalue| {mags[order[0]]:.3g} >= {tol:.3g}"
        )
    if len(w) > 1 and mags[order[1]] < tol:
        raise DegenerateSteadyStateError("multiple zero modes")
    return int(order[0])


def diagonalize(
    basis: FockBasis, params: DimerParams, sectors: Sequence[int] = (0,)
) -> Dict[int, SpectralDecomposition]:
    blocks = build_blocks(basis, params, sectors)
    return {b.nu: diagonalize_block(b) for b in blocks}


def steady_state(decomp: SpectralDecomposition, basis: FockBasis) -> DensityMatrix:
    if decomp.nu != 0 or decomp.zero_mode is None:
        raise DegenerateSteadyStateError("steady state needs the nu=0 decomposition")
    r0 = decomp.block.embed(decomp.right[:, decomp.zero_mode])
    rho = devectorize(r0, basis.dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho).validate()


def steady_state_sparse(basis: FockBasis, params: DimerParams) -> DensityMatrix:
    """Steady state from a sparse linear solve on the nu=0 sector.

    Cheaper than full diagonalization at large cutoffs; one row of the
    block is replaced by the trace condition.
    """
    L = build_liouvillian(basis, params)
    idx = np.flatnonzero(sector_labels(basis) == 0)
    M = L[idx][:, idx].tolil()
    diag_pos = np.flatnonzero(idx // basis.dim == idx % basis.dim)
    M[0, :] = 0
    M[0, diag_pos] = 1.0
    rhs = np.zeros(len(idx), dtype=complex)
    rhs[0] = 1.0
    v = spla.spsolve(M.tocsc(), rhs)
    full = np.zeros(basis.dim**2, dtype=complex)
    full[idx] = v
    rho = devectorize(full, basis.dim)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real).validate()


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be a non-empty, strictly increasing 1-d array")
    return t


def _block_coefficients(decomp: SpectralDecomposition, rho0) -> np.ndarray:
    m = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    v = vectorize(m)
    inside = decomp.block.restrict(v)
    if outside_weight(v, decomp.block) > 1e-12 * max(1.0, np.abs(v).max()):
        raise ValueError(f"initial state has weight outside sector {decomp.nu}")
    return decomp.left @ inside


def outside_weight(vec: np.ndarray, block: LiouvillianBlock) -> float:
    """Largest component of a vectorized operator lying outside ``block``."""
    rest = np.array(vec, dtype=complex, copy=True)
    rest[block.indices] = 0
    return float(np.abs(rest).max()) if len(rest) else 0.0


def _site_traces(decomp: SpectralDecomposition, basis: FockBasis, site: str) -> np.ndarray:
    """<I| n_site |r_a> for every right vector of a nu=0 block."""
    pairs = decomp.block.pairs
    diag = pairs[:, 0] == pairs[:, 1]
    n = basis.occupations(site)[pairs[diag, 0]]
    return n @ decomp.right[diag, :]


def evolve(decomp: SpectralDecomposition, rho0, times, basis: FockBasis) -> Trajectory:
    """Spectral propagation ``rho(t) = sum_a exp(L_a t) <l_a|rho0> |r_a>``."""
    if decomp.nu != 0:
        raise ValueError("populations evolve in the nu=0 sector")
    t = _check_times(times)
    c = _block_coefficients(decomp, rho0)
    phases = np.exp(np.outer(t, decomp.eigenvalues))
    out = {}
    for site in SITES:
        out[site] = (phases @ (_site_traces(decomp, basis, site) * c)).real
    return Trajectory(t, out["L"], out["R"])


def density_matrix_at(decomp: SpectralDecomposition, rho0, t: float) -> np.ndarray:
    c = _block_coefficients(decomp, rho0)
    v = decomp.right @ (np.exp(decomp.eigenvalues * t) * c)
    return devectorize(decomp.block.embed(v), decomp.block.dim)


def evolve_direct_oracle(
    L: sp.spmatrix,
    rho0,
    times,
    basis: FockBasis,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    return_states: bool = False,
):
    """Integrate ``d vec(rho)/dt = L vec(rho)`` with Dormand-Prince 4(5).

    Independent of the eigendecomposition; meant for small cutoffs.
    """
    t = _check_times(times)
    m = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    L = sp.csr_matrix(L)
    sol = solve_ivp(
        lambda _, y: L @ y,
        (t[0], t[-1]),
        vectorize(m),
        method="RK45",
        t_eval=t,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise StiffnessError(sol.message)
    d = basis.dim
    diag = np.arange(d) * (d + 1)
    pops = sol.y[diag, :].real
    traj = Trajectory(t, basis.occupations("L") @ pops, basis.occupations("R") @ pops)
    if return_states:
        return traj, sol.y.T.reshape(len(t), d, d)
    return traj


def _window_samples(times, values, t0, t1):
    if t0 < times[0] - 1e-12 or t1 > times[-1] + 1e-12 or t1 <= t0:
        raise ValueError(f"window [{t0}, {t1}] outside trajectory support")
    inner = (times > t0) & (times < t1)
    ts = np.concatenate(([t0], times[inner], [t1]))
    vs = np.concatenate(([np.interp(t0, times, values)], values[inner], [np.interp(t1, times, values)]))
    return ts, vs


def time_average(times, values, window: Tuple[float, float]) -> float:
    t0, t1 = window
    ts, vs = _window_samples(np.asarray(times), np.asarray(values), t0, t1)
    return float(np.trapezoid(vs, ts) / (t1 - t0))


def late_decay_rate(traj: Trajectory, fit_window: Optional[Tuple[float, float]] = None) -> float:
    """Least-squares decay rate of ``ln|Z(t)/Z(0)|`` over a late window.

    The default window is the last decade of the grid that still has
    ``|Z| > 1e-12``.
    """
    t, Z = traj.times, traj.Z
    if fit_window is None:
        usable = np.flatnonzero(np.abs(Z) > 1e-12)
        if len(usable) < 2:
            raise FitRejectedError("Z(t) vanishes on the whole grid")
        t_hi = t[usable[-1]]
        fit_window = (t_hi / 10.0, t_hi)
    mask = (t >= fit_window[0]) & (t <= fit_window[1]) & (np.abs(Z) > 1e-12)
    if mask.sum() < 2:
        raise FitRejectedError("fewer than two usable points in the fit window")
    z = Z[mask]
    if np.any(np.sign(z) != np.sign(z[0])):
        raise FitRejectedError("Z(t) changes sign inside the fit window")
    slope = np.polyfit(t[mask], np.log(np.abs(z / Z[0])), 1)[0]
    return float(-slope)


def imbalance_metrics(
    traj: Trajectory,
    window: Optional[Tuple[float, float]] = None,
    fit_window: Optional[Tuple[float, float]] = None,
) -> ImbalanceMetrics:
    if window is None:
        window = (traj.times[0], traj.times[-1])
    return ImbalanceMetrics(
        time_average(traj.times, traj.Z, window), late_decay_rate(traj, fit_window)
    )


def zero_crossings(times, values, t_max: Optional[float] = None) -> int:
    """Number of sign changes of a sampled series up to ``t_max``."""
    times, values = np.asarray(times), np.asarray(values)
    if t_max is not None:
        keep = times <= t_max
        times, values = times[keep], values[keep]
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
