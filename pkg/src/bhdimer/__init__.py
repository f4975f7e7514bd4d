"""Exact-diagonalization engine for the driven-dissipative Bose-Hubbard dimer."""

__version__ = "0.1.0"
