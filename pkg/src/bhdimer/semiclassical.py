"""Mean-field dynamics of the dimer in the variables ``N``, ``Z`` and ``phi``.

``N = n_L + n_R`` is the total occupation, ``Z = n_L - n_R`` the imbalance and
``phi`` the relative phase. Without losses ``N`` and the energy

    E = U Z^2 / 2 + delta_omega Z / 2 + J sqrt(N^2 - Z^2) cos(phi)

are conserved, and the closed-system period has an elliptic closed form.
Elliptic integrals use the *parameter* convention, ``K(m) = int_0^{pi/2}
du / sqrt(1 - m sin^2 u)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq

BOUNDARY_REL = 1e-12
RTOL = 1e-10
ATOL = 1e-12
DEFAULT_AVERAGE_T = 200.0
CROSSOVER_FRACTION = 0.05


class BoundarySingularityError(ValueError):
    """State with ``|Z| >= N``, where ``sqrt(N^2 - Z^2)`` is not real."""


class StiffnessError(RuntimeError):
    """The integrator could not advance the state."""


@dataclass(frozen=True)
class SCParams:
    U: float
    J: float
    delta_omega: float = 0.0
    gamma_eff_L: float = 0.0
    gamma_eff_R: float = 0.0

    def __post_init__(self):
        if self.gamma_eff_L < 0 or self.gamma_eff_R < 0:
            raise ValueError("effective losses must be non-negative")

    @property
    def is_closed(self) -> bool:
        return self.gamma_eff_L == 0 and self.gamma_eff_R == 0


@dataclass(frozen=True)
class SCState:
    N: float
    Z: float
    phi: float = 0.0

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be non-negative")
        if abs(self.Z) > self.N:
            raise BoundarySingularityError(f"|Z|={abs(self.Z)} exceeds N={self.N}")

    def as_array(self) -> np.ndarray:
        return np.array([self.N, self.Z, self.phi], dtype=float)


@dataclass(frozen=True)
class ClosedFormResult:
    critical_ratio: float
    Z1_squared: float
    period: float  # math.inf exactly at the critical ratio

    @property
    def delocalized(self) -> bool:
        return self.Z1_squared < 0


@dataclass(frozen=True)
class SCDerivative:
    N: float
    Z: float
    phi: float


def sc_rhs(state: SCState, params: SCParams) -> "SCDerivative":
    """Time derivative ``(dN, dZ, dphi)``."""
    d = _rhs(state.N, state.Z, state.phi, params, clamp=False)
    return SCDerivative(*d)


def _rhs(N, Z, phi, p: SCParams, clamp: bool):
    rad = N * N - Z * Z
    floor = (BOUNDARY_REL * N) ** 2
    if rad <= floor:
        if not clamp or N <= 0:
            raise BoundarySingularityError(f"|Z|={abs(Z)} is at the boundary N={N}")
        rad = floor
    root = math.sqrt(rad)
    gs = p.gamma_eff_L + p.gamma_eff_R
    gd = p.gamma_eff_L - p.gamma_eff_R
    dN = -gs * N - gd * Z
    dZ = -gs * Z - gd * N - 2 * p.J * root * math.sin(phi)
    dphi = -p.delta_omega - 2 * p.U * Z + 2 * p.J * Z / root * math.cos(phi)
    return dN, dZ, dphi


def energy(state: SCState, params: SCParams) -> float:
    """Conserved energy of the lossless equations."""
    root = math.sqrt(max(state.N**2 - state.Z**2, 0.0))
    return (
        0.5 * params.U * state.Z**2
        + 0.5 * params.delta_omega * state.Z
        + params.J * root * math.cos(state.phi)
    )


@dataclass(frozen=True)
class SCTrajectory:
    t: np.ndarray  # accepted integrator steps
    y: np.ndarray  # (3, len(t)) rows N, Z, phi
    sol: object  # scipy dense output, callable on times
    params: SCParams
    state0: SCState

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def __call__(self, times) -> np.ndarray:
        return self.sol(times)

    def Z(self, times) -> np.ndarray:
        return self.sol(times)[1]


def integrate(
    state0: SCState, params: SCParams, t_end: float, rtol: float = RTOL, atol: float = ATOL
) -> SCTrajectory:
    """Embedded RK4(5) integration with dense output."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if state0.N == 0:
        raise BoundarySingularityError("N = 0 has no defined phase dynamics")

    def f(_t, y):
        return _rhs(y[0], y[1], y[2], params, clamp=True)

    sol = solve_ivp(
        f, (0.0, t_end), state0.as_array(), method="RK45", rtol=rtol, atol=atol, dense_output=True
    )
    if sol.status != 0:
        raise StiffnessError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return SCTrajectory(sol.t, sol.y, sol.sol, params, state0)


def critical_ratio(N0: float, Z0: float) -> float:
    """Closed-system ``(J/U)_c`` separating localized and delocalized motion."""
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    if abs(Z0) > N0:
        raise ValueError(f"|Z0|={abs(Z0)} exceeds N0={N0}")
    return N0 * (math.sqrt(1.0 - (Z0 / N0) ** 2) + 1.0) / 2.0


def turning_point(N0: float, Z0: float, J_over_U: float) -> float:
    """``Z1^2``, the second root of ``p(Z)``; negative in the delocalized regime."""
    r = J_over_U
    return Z0**2 + 4 * r * math.sqrt(N0**2 - Z0**2) - 4 * r**2


# --- elliptic integrals of the first kind (parameter convention) -----------


def _agm(a: float, b: float, tol: float = 1e-15) -> float:
    while abs(a - b) > tol * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def elliptic_K(m: float) -> float:
    """Complete integral ``K(m)`` for ``m <= 1``; ``inf`` at ``m = 1``."""
    if m > 1:
        raise ValueError(f"parameter m={m} > 1 outside the real domain")
    if m == 1:
        return math.inf
    return math.pi / (2 * _agm(1.0, math.sqrt(1.0 - m)))


def elliptic_F(phi: float, m: float) -> float:
    """Incomplete integral ``F(phi | m)`` for ``m <= 1`` by descending Landen (AGM phase)."""
    if m > 1:
        raise ValueError(f"parameter m={m} > 1 outside the real domain")
    if phi == 0:
        return 0.0
    if m == 1:
        if abs(phi) >= math.pi / 2:
            return math.copysign(math.inf, phi)
        return math.atanh(math.sin(phi))
    # reduce to [0, pi/2] using F(k pi + x) = 2k K + F(x) and oddness
    sign = math.copysign(1.0, phi)
    x = abs(phi)
    k = math.floor(x / math.pi + 0.5)
    x -= k * math.pi
    base = 2 * k * elliptic_K(m) if k else 0.0
    inner = math.copysign(_landen_F(abs(x), m), x)
    return sign * (base + inner)


def _landen_F(phi: float, m: float) -> float:
    """``F(phi | m)`` for ``0 <= phi <= pi/2``."""
    a, b = 1.0, math.sqrt(1.0 - m)
    ph = phi
    n = 0
    while abs(a - b) > 1e-15 * a:
        t = math.atan(b / a * math.tan(ph)) if ph != math.pi / 2 else math.pi / 2
        # keep phi_{n+1} close to 2 phi_n
        ph = ph + t + math.pi * round((ph - t) / math.pi)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        n += 1
    return ph / (2**n * a)


def oscillation_period(N0: float, Z0: float, J_over_U: float, U: float) -> float:
    """Closed-system period of ``Z(t)``; ``inf`` exactly at the critical ratio.

    Delocalized: ``4 K(Z0^2/Z1^2) / (U sqrt(-Z1^2))`` (negative parameter).
    Localized: ``Z`` moves between ``lo = min(Z0, Z1)`` and ``hi = max(Z0, Z1)``
    and the period is ``2 K(1 - lo^2/hi^2) / (U hi)``, the real form of the
    ``K - F`` expression, which is complex term by term on this branch.
    """
    if U <= 0:
        raise ValueError("U must be positive")
    z1sq = turning_point(N0, Z0, J_over_U)
    if J_over_U == critical_ratio(N0, Z0) or z1sq == 0:
        return math.inf
    if z1sq < 0:
        return 4 * elliptic_K(Z0**2 / z1sq) / (U * math.sqrt(-z1sq))
    z1 = math.sqrt(z1sq)
    lo, hi = sorted((abs(Z0), z1))
    return 2 * elliptic_K(1.0 - (lo / hi) ** 2) / (U * hi)


def period_quadrature(N0: float, Z0: float, J_over_U: float, U: float) -> float:
    """Independent oracle: ``int dZ / sqrt(p(Z))`` between the turning points.

    ``p = J^2 (N0^2 - Z^2) - (E - U Z^2 / 2)^2`` comes from energy
    conservation. Its root at ``Z0^2`` is divided out exactly, leaving
    ``p = (Z^2 - Z0^2) q(Z^2)`` with ``q`` linear; the second turning point is
    the root of ``q`` itself, so the endpoints agree with the integrand to
    roundoff. The substitution ``Z = a + (b - a)(1 - cos th)/2`` removes the
    endpoint square-root singularities.
    """
    J = J_over_U * U
    E = 0.5 * U * Z0**2 + J * math.sqrt(N0**2 - Z0**2)
    c0 = U * E - J**2 - 0.25 * U**2 * Z0**2

    def p(Z):
        return (Z * Z - Z0**2) * (c0 - 0.25 * U**2 * Z * Z)

    z1sq = 4 * c0 / U**2
    if z1sq == 0:
        return math.inf
    if z1sq < 0:
        a, b = -abs(Z0), abs(Z0)
    else:
        a, b = sorted((abs(Z0), math.sqrt(z1sq)))

    def integrand(th):
        val = p(a + (b - a) * (1 - math.cos(th)) / 2)
        return 0.5 * (b - a) * math.sin(th) / math.sqrt(val) if val > 0 else 0.0

    with warnings.catch_warnings():
        # the request sits at roundoff level; the achieved accuracy is ~1e-11
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def closed_form(N0: float, Z0: float, J_over_U: float, U: float) -> ClosedFormResult:
    return ClosedFormResult(
        critical_ratio(N0, Z0),
        turning_point(N0, Z0, J_over_U),
        oscillation_period(N0, Z0, J_over_U, U),
    )


# --- open-system diagnostics -------------------------------------------------


def _scan_times(traj: SCTrajectory, t_max: float, per_step: int = 8) -> np.ndarray:
    steps = traj.t[traj.t <= t_max]
    if steps[-1] < t_max:
        steps = np.append(steps, t_max)
    sub = np.linspace(0.0, 1.0, per_step + 1)[:-1]
    grid = (steps[:-1, None] + np.diff(steps)[:, None] * sub).ravel()
    return np.append(grid, steps[-1])


def crossing_time(traj: SCTrajectory, t_max: float | None = None, xtol: float = 1e-9) -> float:
    """First time with ``Z(t) = 0``; ``inf`` if there is none up to ``t_max``."""
    if traj.state0.Z == 0:
        return 0.0
    t_max = traj.t_end if t_max is None else min(t_max, traj.t_end)
    grid = _scan_times(traj, t_max)
    z = traj.Z(grid)
    s0 = np.sign(traj.state0.Z)
    hit = np.flatnonzero(np.sign(z) != s0)
    if hit.size == 0:
        return math.inf
    k = hit[0]
    if z[k] == 0:
        return float(grid[k])
    return float(brentq(lambda t: float(traj.Z(t)), grid[k - 1], grid[k], xtol=xtol, rtol=4 * np.finfo(float).eps))


def sc_time_averaged_imbalance(traj: SCTrajectory, T: float = DEFAULT_AVERAGE_T, n_per_step: int = 16) -> float:
    """``(1/T) int_0^T Z dt``, trapezoid on the dense output."""
    if T <= 0:
        raise ValueError("T must be positive")
    if T > traj.t_end * (1 + 1e-12):
        raise ValueError(f"T={T} exceeds the trajectory length {traj.t_end}")
    grid = _scan_times(traj, T, n_per_step)
    return float(np.trapezoid(traj.Z(grid), grid) / T)


def averaged_imbalance_at(
    J_over_U: float,
    N0: float,
    Z0: float,
    U: float,
    gamma_eff: float,
    T: float = DEFAULT_AVERAGE_T,
    phi0: float = 0.0,
) -> float:
    params = SCParams(U=U, J=J_over_U * U, gamma_eff_L=gamma_eff, gamma_eff_R=gamma_eff)
    traj = integrate(SCState(N0, Z0, phi0), params, T)
    return sc_time_averaged_imbalance(traj, T)


def crossover_estimate(
    N0: float,
    Z0: float,
    U: float,
    gamma_eff: float,
    T: float = DEFAULT_AVERAGE_T,
    scan=None,
    fraction: float = CROSSOVER_FRACTION,
    xtol: float = 1e-4,
) -> float:
    """First ``J/U`` on an increasing scan where ``<Z>_T`` drops below ``fraction * Z0``.

    The crossing is refined by bisection between the last scan point above the
    threshold and the first one below it.
    """
    if scan is None:
        c = critical_ratio(N0, Z0)
        scan = np.arange(c - 0.4, c + 0.3, 0.01)
    scan = np.asarray(scan, dtype=float)
    threshold = fraction * abs(Z0)

    def above(r):
        return abs(averaged_imbalance_at(r, N0, Z0, U, gamma_eff, T)) >= threshold

    if not above(scan[0]):
        raise ValueError("scan starts below the threshold; lower its first value")
    prev = scan[0]
    for r in scan[1:]:
        if not above(r):
            lo, hi = prev, r
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if above(mid) else (lo, mid)
            return 0.5 * (lo + hi)
        prev = r
    raise ValueError("no crossover found on the scan")
