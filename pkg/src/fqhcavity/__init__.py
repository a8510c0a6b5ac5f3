"""Exact diagonalization and dynamics for lattice FQH states of hard-core bosons and cavity arrays.

Kept import-light so the CLI can set BLAS thread counts before numpy loads.
"""

__version__ = "0.1.0"
