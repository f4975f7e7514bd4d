import functools

import pytest

from bhdimer.fock import DimerParams, enumerate_basis
from bhdimer.spectral import diagonalize, steady_state

ACCEPTANCE_LINES = []  # (criterion number, line)


def record(number, passed, detail):
    """Register the summary line of one acceptance criterion."""
    flag = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append((number, f"{flag} criterion {number}: {detail}"))


@functools.lru_cache(maxsize=None)
def basis(cutoff):
    return enumerate_basis(cutoff)


@functools.lru_cache(maxsize=32)
def decomposition(cutoff, params, sectors=(0,)):
    return diagonalize(basis(cutoff), params, sectors)


def steady(cutoff, params):
    return steady_state(decomposition(cutoff, params)[0], basis(cutoff))


def symmetric_params(J_over_U=0.0, U=0.1):
    """Gamma_eff = 1e-4 and P = 2e-4 on both sites: bare occupation 2."""
    return DimerParams.from_effective(1e-4, 2e-4, U=U, J=J_over_U * U)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
