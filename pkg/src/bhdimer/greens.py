"""Steady-state single-particle Green's functions as exact pole sums.

With ``A = a_i`` and ``B = a_j^dag`` the retarded and Keldysh functions are
finite sums of terms ``w / (omega - p)``. Some groups enter under an outer
complex conjugation; those are kept with ``conjugated=True`` and the overall
sign folded into ``w``.

Matrix elements follow the row-major vectorization of
:mod:`bhdimer.liouvillian`:

* ``<I|X|r>`` is ``Tr(X r)``;
* ``<l|Y|rho>`` is ``l . vec(Y rho)``, i.e. ``Y`` acts on the ket side.

``Y rho_ss`` lives in sector +1 when ``Y`` is a creation operator and in
sector -1 when it is an annihilation operator, which fixes the block every
group is taken from. A worked single-mode example: for one damped mode,
``a^dag rho_ss`` is in sector +1, the only +1 eigenvalue reached by it is
``L = -i omega0 - (Gamma - P)``, and the first retarded group becomes
``1 / (omega - i L) = 1 / (omega - omega0 + i (Gamma - P))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import scipy.optimize as opt
import scipy.sparse as sp

from .fock import DimerParams, FockBasis, SITES, annihilation, current_operator, hopping_operator
from .liouvillian import vectorize
from .spectral import DensityMatrix, SpectralDecomposition, outside_weight

PRUNE_TOL = 1e-14


@dataclass(frozen=True)
class PoleSum:
    poles: np.ndarray
    weights: np.ndarray
    conjugated: np.ndarray
    kind: str
    indices: Tuple[str, str]

    def __len__(self):
        return len(self.poles)

    def __call__(self, omega) -> np.ndarray:
        return evaluate_g(self, omega)

    def integral(self) -> complex:
        """Symmetric-limit integral over the real axis, term by term.

        ``lim_{W->inf} int_{-W}^{W} dw / (w - p) = i pi sign(Im p)``.
        """
        s = np.sign(self.poles.imag)
        parts = 1j * np.pi * s * self.weights
        return complex(parts[~self.conjugated].sum() + np.conj(parts[self.conjugated]).sum())

    def effective_poles(self) -> np.ndarray:
        """Pole positions of the function as evaluated (conjugation applied)."""
        return np.where(self.conjugated, np.conj(self.poles), self.poles)


@dataclass(frozen=True)
class SpectralSeries:
    frequencies: np.ndarray
    A: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)
    C: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class SumRuleReport:
    norm: Dict[str, float]
    occupation: Dict[str, float]
    kinetic: float
    current: float
    current_rate_formula: float
    # independent steady-state expectation values
    occupation_direct: Dict[str, float]
    commutator_direct: Dict[str, float]
    kinetic_direct: float
    current_direct: float
    current_rate_formula_truncated: float

    def checks(self, tol: float = 1e-6, norm_tol: float = 1e-8) -> Dict[str, dict]:
        """Each identity as ``{lhs, rhs, error, passed}``."""
        rows = {}

        def add(name, lhs, rhs, t):
            err = abs(lhs - rhs)
            rows[name] = {"lhs": lhs, "rhs": rhs, "error": err, "passed": bool(err <= t)}

        for s in SITES:
            add(f"norm_{s}", self.norm[s], 1.0, norm_tol)
            add(f"occupation_{s}", self.occupation[s], self.occupation_direct[s], tol)
        add("kinetic", self.kinetic, self.kinetic_direct, tol)
        add("current_integral_vs_direct", self.current, self.current_direct, tol)
        add("current_integral_vs_rate_formula", self.current, self.current_rate_formula, tol)
        add("current_rate_formula_vs_direct", self.current_rate_formula, self.current_direct, tol)
        return rows

    def truncation_checks(self, tol: float = 1e-8) -> Dict[str, dict]:
        """The same identities with the truncated-space right-hand sides."""
        rows = {}

        def add(name, lhs, rhs):
            err = abs(lhs - rhs)
            rows[name] = {"lhs": lhs, "rhs": rhs, "error": err, "passed": bool(err <= tol)}

        for s in SITES:
            add(f"norm_{s}", self.norm[s], self.commutator_direct[s])
            anti = 2 * self.occupation_direct[s] + self.commutator_direct[s]
            add(f"occupation_{s}", 2 * self.occupation[s] + 1, anti)
        add("kinetic", self.kinetic, self.kinetic_direct)
        add("current", self.current, self.current_direct)
        add("current_rate_formula", self.current_rate_formula_truncated, self.current_direct)
        return rows


def _ops(basis: FockBasis, i: str, j: str):
    ai = annihilation(basis, i)
    aj = annihilation(basis, j)
    A, Adag = ai, ai.conj().T.tocsr()
    B, Bdag = aj.conj().T.tocsr(), aj
    return A, Adag, B, Bdag


def _group(
    decomps: Mapping[int, SpectralDecomposition],
    X,
    Y,
    y_sector: int,
    rho: np.ndarray,
    sign: float,
    pole_sign: float,
    conjugated: bool,
):
    """Terms ``sign * Tr(X r_a) <l_a|vec(Y rho)> / (omega - pole_sign * i L_a)``."""
    if y_sector not in decomps:
        raise ValueError(f"need the decomposition of sector {y_sector}")
    dec = decomps[y_sector]
    if dec.nu != y_sector:
        raise ValueError(f"decomposition labelled {dec.nu} supplied for sector {y_sector}")
    y_rho = vectorize(Y @ rho)
    inside = dec.block.restrict(y_rho)
    if outside_weight(y_rho, dec.block) > 1e-12 * max(1.0, np.abs(y_rho).max()):
        raise ValueError(f"Y rho is not contained in sector {y_sector}")
    x_row = dec.block.restrict(vectorize(X.T))
    w = sign * (x_row @ dec.right) * (dec.left @ inside)
    p = pole_sign * 1j * dec.eigenvalues
    return p, w, np.full(len(p), conjugated)


def greens_pole_sum(
    decomps: Mapping[int, SpectralDecomposition],
    rho_ss: DensityMatrix,
    basis: FockBasis,
    i: str,
    j: str,
    kind: str = "retarded",
    prune: float = PRUNE_TOL,
) -> PoleSum:
    if i not in SITES or j not in SITES:
        raise ValueError("sites must be 'L' or 'R'")
    rho = rho_ss.matrix if isinstance(rho_ss, DensityMatrix) else np.asarray(rho_ss)
    A, Adag, B, Bdag = _ops(basis, i, j)
    if kind == "retarded":
        groups = [
            _group(decomps, A, B, +1, rho, +1, +1, False),
            _group(decomps, Adag, Bdag, -1, rho, -1, -1, True),
        ]
    elif kind == "keldysh":
        groups = [
            _group(decomps, A, B, +1, rho, +1, +1, False),
            _group(decomps, B, A, -1, rho, -1, -1, False),
            _group(decomps, Adag, Bdag, -1, rho, +1, -1, True),
            _group(decomps, Bdag, Adag, +1, rho, -1, +1, True),
        ]
    else:
        raise ValueError(f"kind must be 'retarded' or 'keldysh', got {kind!r}")
    poles = np.concatenate([g[0] for g in groups])
    weights = np.concatenate([g[1] for g in groups])
    conj = np.concatenate([g[2] for g in groups])
    keep = np.abs(weights) >= prune if prune > 0 else np.ones(len(weights), bool)
    return PoleSum(poles[keep], weights[keep], conj[keep], kind, (i, j))


_CHUNK_ELEMENTS = 2_000_000


def evaluate_g(ps: PoleSum, omega) -> np.ndarray:
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    flat = om.reshape(-1)
    out = np.zeros(flat.shape, dtype=complex)
    step = max(1, _CHUNK_ELEMENTS // max(1, len(ps)))
    for mask, flip in ((~ps.conjugated, False), (ps.conjugated, True)):
        if not mask.any():
            continue
        w, p = ps.weights[mask], ps.poles[mask]
        for k in range(0, flat.size, step):
            terms = (w / (flat[k : k + step, None] - p)).sum(axis=1)
            out[k : k + step] += np.conj(terms) if flip else terms
    out = out.reshape(om.shape)
    return out if np.ndim(omega) else out[0]


def integral_below(ps: PoleSum, x: float) -> complex:
    """``int_{-inf}^{x} G(omega) d omega`` with the ``log W`` tail dropped.

    The tail is ``sum(w) log W``; it is real whenever the ``1/omega`` tail of
    ``G`` is real (true for the diagonal functions), so the imaginary part is
    exact. ``int_{-W}^{x} dw/(w-p) -> log(x-p) - log W + i pi sign(Im p)``.
    """
    s = np.sign(ps.poles.imag)
    parts = ps.weights * (np.log(x - ps.poles) + 1j * np.pi * s)
    return complex(parts[~ps.conjugated].sum() + np.conj(parts[ps.conjugated]).sum())


def spectral_weight_below(ps: PoleSum, x: float) -> float:
    """``int_{-inf}^{x} A(omega) d omega``."""
    if ps.kind != "retarded":
        raise ValueError("spectral weight needs a retarded pole sum")
    return float(-integral_below(ps, x).imag / np.pi)


def spectral_function(ps: PoleSum, omega) -> np.ndarray:
    if ps.kind != "retarded":
        raise ValueError("spectral function needs a retarded pole sum")
    return -evaluate_g(ps, omega).imag / np.pi


def correlation_function(ps: PoleSum, omega) -> np.ndarray:
    if ps.kind != "keldysh":
        raise ValueError("correlation function needs a Keldysh pole sum")
    return 1j * evaluate_g(ps, omega) / (2 * np.pi)


def evaluate(ps: PoleSum, frequencies) -> SpectralSeries:
    om = np.asarray(frequencies, dtype=float)
    if ps.kind == "retarded":
        return SpectralSeries(om, A={ps.indices: spectral_function(ps, om)})
    return SpectralSeries(om, C={ps.indices: correlation_function(ps, om)})


def integrated_spectral(ps: PoleSum) -> float:
    return float(-ps.integral().imag / np.pi)


def integrated_correlation(ps: PoleSum) -> complex:
    return 1j * ps.integral() / (2 * np.pi)


def stationary_current(params: DimerParams, n_L: float, n_R: float) -> float:
    """Mean L -> R current fixed by the rates and the stationary occupations."""
    return params.dP - n_L * params.gamma_eff_L + n_R * params.gamma_eff_R


def _truncated_current(params: DimerParams, rho: DensityMatrix, basis: FockBasis) -> float:
    f = {}
    for s in SITES:
        a = annihilation(basis, s)
        aad = rho.expect(a @ a.conj().T).real
        n = rho.expect(a.conj().T @ a).real
        f[s] = params.pump(s) * aad - params.gamma(s) * n
    return f["L"] - f["R"]


@dataclass(frozen=True)
class GreensBundle:
    """All pole sums needed for the diagonal and L-R functions."""

    retarded: Dict[Tuple[str, str], PoleSum]
    keldysh: Dict[Tuple[str, str], PoleSum]


def all_pole_sums(decomps, rho_ss, basis, pairs=(("L", "L"), ("R", "R"), ("L", "R")), prune=PRUNE_TOL):
    ret = {ij: greens_pole_sum(decomps, rho_ss, basis, *ij, "retarded", prune) for ij in pairs}
    kel = {ij: greens_pole_sum(decomps, rho_ss, basis, *ij, "keldysh", prune) for ij in pairs}
    return GreensBundle(ret, kel)


def sum_rules(
    bundle: GreensBundle, params: DimerParams, rho_ss: DensityMatrix, basis: FockBasis
) -> SumRuleReport:
    norm, occ, occ_direct, comm = {}, {}, {}, {}
    for s in SITES:
        norm[s] = integrated_spectral(bundle.retarded[(s, s)])
        occ[s] = float((integrated_correlation(bundle.keldysh[(s, s)]).real - 1) / 2)
        a = annihilation(basis, s)
        occ_direct[s] = rho_ss.expect(a.conj().T @ a).real
        comm[s] = rho_ss.expect(a @ a.conj().T - a.conj().T @ a).real
    c_lr = integrated_correlation(bundle.keldysh[("L", "R")])
    return SumRuleReport(
        norm=norm,
        occupation=occ,
        kinetic=float(params.J * c_lr.real),
        current=float(params.J * c_lr.imag),
        current_rate_formula=stationary_current(params, occ_direct["L"], occ_direct["R"]),
        occupation_direct=occ_direct,
        commutator_direct=comm,
        kinetic_direct=rho_ss.expect(params.J * hopping_operator(basis)).real,
        current_direct=rho_ss.expect(current_operator(basis, params.J)).real,
        current_rate_formula_truncated=_truncated_current(params, rho_ss, basis),
    )


def default_frequency_grid(params: DimerParams, mean_occupation: float, n_points: int = 2001):
    half = 2 * (abs(params.J) + abs(params.U) * mean_occupation * 4)
    half = max(half, 10 * max(params.gamma_eff_L, params.gamma_eff_R, 1e-12))
    return np.linspace(params.omega0 - half, params.omega0 + half, n_points)


def spectral_peaks(ps: PoleSum, omega, min_height: float = 0.0) -> np.ndarray:
    """Local maxima of the spectral function, refined on the pole sum itself."""
    om = np.asarray(omega, dtype=float)
    a = spectral_function(ps, om)
    idx = np.flatnonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > min_height)) + 1
    peaks = []
    for k in idx:
        res = opt.minimize_scalar(
            lambda x: -spectral_function(ps, x),
            bounds=(om[k - 1], om[k + 1]),
            method="bounded",
            options={"xatol": 1e-12},
        )
        peaks.append(res.x)
    return np.array(peaks)
