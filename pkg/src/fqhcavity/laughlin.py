"""Laughlin trial states on the plane and on the lattice torus.

Torus states use the Landau gauge of ``landau_phases`` (A = (-alpha y, 0)),
where lowest-Landau-level wavefunctions are holomorphic in z = x + i y times
``exp(-pi alpha y^2)``. With ``tau = i Ly/Lx`` the ``m`` degenerate states are

    theta[s/m, 0](m Z/Lx | m tau) * prod_{i<j} theta_1((z_i - z_j)/Lx | tau)^m
        * exp(-pi alpha sum_j y_j^2),      Z = sum_j z_j,  s = 0..m-1,

sampled at the occupied site coordinates and normalized over the basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BasisMismatch, ConfigError, FillingMismatch
from .hilbert import HardCoreBasis, StateVector
from .lattice import LatticeSpec

THETA_RTOL = 1e-15


def theta(a: float, b: float, z, tau: complex, rtol: float = THETA_RTOL, max_terms: int = 10_000):
    """Theta function with characteristics, ``sum_n exp(i pi (n+a)^2 tau + 2 pi i (n+a)(z+b))``.

    Terms are added outward from the dominant index until the newest terms are
    below ``rtol`` of the partial sum for every element of ``z``.
    """
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    z = np.asarray(z, dtype=complex)
    centre = np.rint(-z.imag / tau.imag - a).astype(np.int64)

    def term(n):
        na = n + a
        return np.exp(1j * math.pi * na * na * tau + 2j * math.pi * na * (z + b))

    total = term(centre)
    for k in range(1, max_terms):
        up, down = term(centre + k), term(centre - k)
        total = total + up + down
        scale = np.abs(total)
        if np.all(np.maximum(np.abs(up), np.abs(down)) <= rtol * np.where(scale > 0, scale, 1.0)):
            return total
    raise ArithmeticError("theta series did not converge")


def theta1(z, tau: complex):
    """Odd Jacobi theta function, ``theta[1/2, 1/2]``; vanishes at z = 0."""
    return theta(0.5, 0.5, z, tau)


@dataclass(frozen=True)
class LaughlinParams:
    m: int
    lattice: LatticeSpec
    alpha: Fraction
    N: int
    sector: int = 0

    def __post_init__(self):
        if self.m <= 0 or self.m % 2:
            raise ConfigError("bosonic Laughlin states need a positive even m")
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if not 0 <= self.sector < self.m:
            raise ConfigError(f"centre-of-mass sector must be in 0..{self.m - 1}")
        if self.lattice.is_torus and self.m * self.N != self.Nphi:
            raise FillingMismatch(f"m*N = {self.m * self.N} but the torus carries {self.Nphi} flux quanta")

    @property
    def Nphi(self):
        n = self.alpha * self.lattice.n_sites
        return int(n) if n.denominator == 1 else n

    @property
    def filling(self) -> Fraction:
        return Fraction(1, self.m)

    @property
    def magnetic_length(self) -> float:
        """``l_B`` in lattice units: one flux quantum per ``2 pi l_B^2`` area."""
        return 1.0 / math.sqrt(2 * math.pi * float(self.alpha))

    def with_sector(self, s: int) -> "LaughlinParams":
        return LaughlinParams(self.m, self.lattice, self.alpha, self.N, s)


def laughlin_plane_amplitude(m: int, positions) -> complex:
    """Unnormalized symmetric-gauge amplitude; coordinates in magnetic lengths."""
    z = np.array([complex(x, y) for x, y in positions])
    amp = complex(np.exp(-0.25 * np.sum(np.abs(z) ** 2)))
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            amp *= (z[i] - z[j]) ** m
    return amp


def laughlin_conventions(params: LaughlinParams) -> dict:
    L = params.lattice
    return {
        "gauge": "landau A=(-alpha*y,0); theta_x=-2*pi*alpha*p*q",
        "coordinates": "z = p + i q at site centres",
        "tau": f"i*{L.Ly}/{L.Lx}",
        "com_factor": f"theta[s/{params.m},0]({params.m}*sum(z)/Lx | {params.m}*tau)",
        "relative_factor": f"theta[1/2,1/2]((z_i-z_j)/Lx | tau)^{params.m}",
        "gaussian": "exp(-pi*alpha*sum(q^2))",
        "sector": params.sector,
    }


def _occupied_coords(basis: HardCoreBasis):
    occ = basis.occupations
    sites = np.nonzero(occ)[1].reshape(basis.dim, basis.N)
    pos = basis.lattice.positions[sites]  # (dim, N, 2)
    return pos[..., 0] + 1j * pos[..., 1]


def torus_amplitudes(params: LaughlinParams, basis: HardCoreBasis) -> np.ndarray:
    """Unnormalized torus amplitudes for every basis configuration."""
    L = params.lattice
    if not L.is_torus:
        raise ConfigError("torus Laughlin states need torus boundary conditions")
    if basis.lattice != L or basis.N != params.N:
        raise BasisMismatch("basis does not match the Laughlin parameters")
    z = _occupied_coords(basis)
    m, Lx = params.m, L.Lx
    tau = 1j * L.Ly / Lx
    com = theta(params.sector / m, 0.0, m * z.sum(axis=1) / Lx, m * tau)
    rel = np.ones(basis.dim, dtype=complex)
    for i in range(params.N):
        for j in range(i + 1, params.N):
            rel *= theta1((z[:, i] - z[:, j]) / Lx, tau) ** m
    gauss = np.exp(-math.pi * float(params.alpha) * np.sum(z.imag**2, axis=1))
    return com * rel * gauss


def laughlin_torus_state(params: LaughlinParams, basis: HardCoreBasis) -> StateVector:
    return StateVector(basis, torus_amplitudes(params, basis)).normalized()


def laughlin_torus_states(params: LaughlinParams, basis: HardCoreBasis) -> list[StateVector]:
    """All ``m`` centre-of-mass sectors, each normalized."""
    return [laughlin_torus_state(params.with_sector(s), basis) for s in range(params.m)]


def laughlin_projector(params: LaughlinParams, basis: HardCoreBasis) -> np.ndarray:
    """Projector onto the span of the ``m`` sectors (orthonormalized first)."""
    V = np.stack([v.amplitudes for v in laughlin_torus_states(params, basis)], axis=1)
    Q, _ = np.linalg.qr(V)
    return Q @ Q.conj().T
