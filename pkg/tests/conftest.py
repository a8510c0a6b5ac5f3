from fractions import Fraction

import numpy as np
import pytest

from fqhcavity.experiments import DEFAULT_CAVITY, DEFAULT_SYSTEM, ground_manifold
from fqhcavity.hamiltonians import build_cavity_model, build_hardcore_fqh, build_single_particle
from fqhcavity.hilbert import CavityBasis, HardCoreBasis
from fqhcavity.lattice import GaugeConfig, LatticeSpec, landau_phases


def second_quantize(h1: np.ndarray, basis: HardCoreBasis) -> np.ndarray:
    """Dense hard-core many-body matrix from a dense single-particle matrix.

    Works on explicit occupied-site tuples, independent of the sparse builder.
    """
    configs = [tuple(np.flatnonzero(row)) for row in basis.occupations]
    where = {c: i for i, c in enumerate(configs)}
    H = np.zeros((basis.dim, basis.dim), dtype=complex)
    for i, c in enumerate(configs):
        occ = set(c)
        for j in c:
            for k in range(h1.shape[0]):
                if k == j or k in occ or h1[k, j] == 0:
                    continue
                new = tuple(sorted(occ - {j} | {k}))
                H[where[new], i] += h1[k, j]
    return H


def single_excitation_cavity(lattice: LatticeSpec, delta: float, omega: float, J: float) -> np.ndarray:
    """Dense N=1 cavity matrix at zero laser phases; rows ordered (site, code)."""
    n = lattice.n_sites
    idx = lambda j, code: 3 * j + (code - 1)  # codes 1 atom, 2 x photon, 3 y photon
    H = np.zeros((3 * n, 3 * n), dtype=complex)
    for j in range(n):
        for code in (2, 3):
            H[idx(j, code), idx(j, code)] = delta
            H[idx(j, code), idx(j, 1)] = omega
            H[idx(j, 1), idx(j, code)] = omega
    links = lattice.links
    for s, d, ax in zip(links.src, links.dst, links.axis):
        code = 2 if ax == 0 else 3
        H[idx(d, code), idx(s, code)] -= J
        H[idx(s, code), idx(d, code)] -= J
    return H


@pytest.fixture(scope="session")
def torus_lattice():
    return LatticeSpec(4, 4)


@pytest.fixture(scope="session")
def torus_pattern(torus_lattice):
    return landau_phases(torus_lattice, GaugeConfig(Fraction(1, 4)))


@pytest.fixture(scope="session")
def hc_basis(torus_lattice):
    return HardCoreBasis(torus_lattice, 2)


@pytest.fixture(scope="session")
def hc_hamiltonian(hc_basis, torus_pattern):
    return build_hardcore_fqh(hc_basis, torus_pattern)


@pytest.fixture(scope="session")
def hc_ground(hc_hamiltonian):
    spec, manifold = ground_manifold(hc_hamiltonian, 4)
    return spec, manifold


@pytest.fixture(scope="session")
def cavity_ground():
    basis = CavityBasis(DEFAULT_SYSTEM.lattice, 2)
    H = build_cavity_model(basis, DEFAULT_SYSTEM.pattern, DEFAULT_CAVITY)
    spec, manifold = ground_manifold(H, 4, cluster_tol=1e-8 * DEFAULT_CAVITY.t)
    return basis, H, spec, manifold


@pytest.fixture(scope="session")
def single_particle(torus_lattice, torus_pattern):
    return build_single_particle(torus_lattice, torus_pattern)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
