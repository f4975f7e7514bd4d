import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bhdimer import oracle_u0 as o
from bhdimer.fock import DimerParams
from bhdimer.spectral import steady_state_sparse

from conftest import basis

ASYM = o.U0Params(1.0, 1.0, 6e-2, 2e-2, 4e-2, 1e-2)


def test_single_cavity_lorentzians():
    om = np.array([0.98, 1.0, 1.03])
    gr, gk = o.single_cavity_gf(1.0, 3e-2, 1e-2, om)
    assert gr == pytest.approx(1 / (om - 1 + 2e-2j))
    # C = i G^K / 2pi integrates to 2n + 1 with n = P / (Gamma - P)
    val, _ = integrate.quad(lambda w: (1j * o.single_cavity_gf(1.0, 3e-2, 1e-2, w)[1]).real / (2 * np.pi), -np.inf, np.inf)
    assert val == pytest.approx(2 * 0.5 + 1, rel=1e-8)


def test_uncoupled_limit_reduces_to_single_cavity():
    om = np.linspace(0.8, 1.2, 41)
    gr, gk = o.coupled_gf(ASYM, 0.0, om, "L")
    sr, sk = o.single_cavity_gf(1.0, 6e-2, 4e-2, om)
    assert np.allclose(gr, sr) and np.allclose(gk, sk)
    assert o.u0_occupations(ASYM, 0.0, "uncoupled") == pytest.approx((2.0, 1.0))


def test_weighted_mean_is_five_thirds():
    n = o.u0_occupations(ASYM, 20.0, "strong_J")
    assert n == pytest.approx((5 / 3, 5 / 3), rel=1e-14)


def test_strong_j_limit_of_closed_form_occupations():
    devs = []
    for J in (1e2, 1e3, 1e4):
        n = [o.occupation_from_keldysh(ASYM, J, s) for s in "LR"]
        devs.append(max(abs(x - 5 / 3) for x in n))
    assert devs[-1] < 1e-10
    assert devs[0] > devs[1] > devs[2]


def test_strong_j_regime_guards():
    with pytest.raises(ValueError):
        o.u0_occupations(ASYM, 1.0, "strong_J")
    detuned = o.U0Params(1.0, 1.1, 6e-2, 2e-2, 4e-2, 1e-2)
    with pytest.raises(ValueError):
        o.u0_occupations(detuned, 100.0, "strong_J")
    with pytest.raises(ValueError):
        o.u0_occupations(ASYM, 1.0, "ballistic")


def test_lossless_right_site_inherits_left_occupation():
    for eps, tol in ((1e-8, 1e-3), (1e-10, 1e-5)):
        p = o.lossless_right_params(1e-4 + 1e-4, 1e-4, eps=eps)
        assert p.bare_occupation("L") == pytest.approx(1.0)
        ref = o.u0_occupations(p, 0.01, "lossless_right")
        got = [o.occupation_from_keldysh(p, 0.01, s) for s in "LR"]
        assert ref == pytest.approx((1.0, 1.0))
        # the residual scales like eps / (Gamma_L - P_L)
        assert max(abs(g - 1.0) for g in got) < tol


def test_lossless_regime_guards():
    with pytest.raises(ValueError):
        o.u0_occupations(ASYM, 0.1, "lossless_right")
    p = o.lossless_right_params(2e-4, 1e-4)
    with pytest.raises(ValueError):
        o.u0_occupations(p, 0.0, "lossless_right")
    with pytest.raises(ValueError):
        o.U0Params(1.0, 1.0, 1e-4, 0.0, 2e-4, 0.0)


def test_hybridized_frequencies_and_poles():
    J = 0.15
    lo, hi = o.hybridized_frequencies(ASYM, J)
    assert hi - lo == pytest.approx(2 * np.sqrt(J**2 + 2e-2 * 1e-2))
    poles = o.retarded_poles(ASYM, J)
    assert np.all(poles.imag < 0)
    assert sorted(poles.real) == pytest.approx([1 - np.sqrt(J**2 - 5e-3**2), 1 + np.sqrt(J**2 - 5e-3**2)])


@pytest.mark.parametrize("J", [0.0, 0.01, 0.3])
def test_spectral_normalization_and_positivity(J):
    f = lambda w: o.spectral_function(ASYM, J, w)
    val, _ = integrate.quad(f, -np.inf, np.inf, limit=400, points=None)
    assert val == pytest.approx(1.0, abs=1e-6)
    assert o.spectral_function(ASYM, J, np.linspace(0, 2, 2001)).min() >= 0


@pytest.mark.parametrize("J", [0.01, 0.05, 0.3])
def test_residue_integral_matches_quadrature(J):
    for s in "LR":
        f = lambda w: o.correlation_function(ASYM, J, w, s)
        pts = sorted(o.retarded_poles(ASYM, J).real)
        val = sum(
            integrate.quad(f, a, b, limit=400)[0]
            for a, b in zip([-np.inf] + pts, pts + [np.inf])
        )
        assert o.integrated_correlation(ASYM, J, s) == pytest.approx(val, rel=1e-7)


def test_current_conservation_from_closed_forms():
    J = 0.05
    nL, nR = (o.occupation_from_keldysh(ASYM, J, s) for s in "LR")
    # total gain equals total loss in the steady state
    gain = 2 * (4e-2 + 1e-2)
    loss = 2 * (2e-2 * nL + 1e-2 * nR)
    assert gain == pytest.approx(loss, rel=1e-10)


@pytest.mark.parametrize("J", [0.0, 0.02, 0.1])
def test_exact_diagonalization_matches_closed_form_occupations(J):
    p = DimerParams(U=0.0, J=J, gamma_L=2e-3, gamma_R=1e-3, pump_L=2e-5, pump_R=5e-6)
    # U = J = 0 is exactly degenerate, so use the direct null-space solve
    rho = steady_state_sparse(basis(8), p)
    ed = rho.occupations(basis(8))
    ref = o.U0Params.from_dimer(p)
    assert ed == pytest.approx([o.occupation_from_keldysh(ref, J, s) for s in "LR"], rel=1e-7)


def test_exact_diagonalization_approaches_strong_j_limit():
    base = dict(U=0.0, gamma_L=3e-3, gamma_R=1e-3, pump_L=1e-4, pump_R=1e-5)
    ref = o.U0Params(1.0, 1.0, **{k: v for k, v in base.items() if k != "U"})
    target = o.u0_occupations(ref, 1.0, "strong_J")[0]
    gaps = []
    for J in (1e-3, 1e-2, 1e-1, 1.0):
        nL, nR = steady_state_sparse(basis(8), DimerParams(J=J, **base)).occupations(basis(8))
        gaps.append(max(abs(nL - target), abs(nR - target)))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-7


@settings(max_examples=25, deadline=None)
@given(
    J=st.floats(0.0, 1.0),
    gl=st.floats(1e-3, 1e-1),
    gr=st.floats(1e-3, 1e-1),
    xl=st.floats(0.0, 0.9),
    xr=st.floats(0.0, 0.9),
)
def test_occupations_bracketed_by_bare_values(J, gl, gr, xl, xr):
    p = o.U0Params(1.0, 1.0, gl, gr, xl * gl, xr * gr)
    lo, hi = sorted([p.bare_occupation("L"), p.bare_occupation("R")])
    try:
        n = [o.occupation_from_keldysh(p, J, s) for s in "LR"]
    except ValueError:
        return  # exceptional point, explicitly refused
    slack = 1e-8 * max(1.0, hi)
    assert all(lo - slack <= x <= hi + slack for x in n)
