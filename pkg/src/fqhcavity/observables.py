"""Diagnostics on states and spectra: densities, correlations, gaps, fidelities.

Fidelities against degenerate manifolds are projector overlaps, so they do not
depend on which orthonormal basis a solver returned for the manifold.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .eigensolver import lowest_eigenpairs
from .errors import BasisMismatch
from .hamiltonians import PinningPotential, build_hardcore_fqh
from .hilbert import ATOM, PHOTON_X, PHOTON_Y, CavityBasis, HardCoreBasis, StateVector, check_same_basis
from .lattice import PhasePattern


def _weights(v: StateVector) -> np.ndarray:
    return np.abs(v.amplitudes) ** 2


def _occupations(basis) -> np.ndarray:
    if isinstance(basis, HardCoreBasis):
        return basis.occupations
    if isinstance(basis, CavityBasis):
        return basis.site_codes == ATOM
    raise BasisMismatch("unsupported basis type")


def density(v: StateVector) -> np.ndarray:
    """Per-site occupation of the atomic state |1>, indexed by site."""
    return _weights(v) @ _occupations(v.basis)


def manifold_density(states: Sequence[StateVector]) -> np.ndarray:
    """Density of the equal-weight mixture over a manifold's basis vectors."""
    return sum(density(v) for v in states) / len(states)


@dataclass(frozen=True)
class PairCorrelation:
    """``table[dp, dq] = (1/(Lx Ly)) sum_{p,q} <n(p,q) n(p+dp,q+dq)>`` over distinct sites.

    Displacements wrap on a torus; on open lattices pairs leaving the lattice are skipped.
    """

    table: np.ndarray

    def __call__(self, dp: int, dq: int) -> float:
        Lx, Ly = self.table.shape
        return float(self.table[dp % Lx, dq % Ly])


def pair_correlation(v: StateVector) -> PairCorrelation:
    occ = _occupations(v.basis).astype(float)
    w = _weights(v)
    M = occ.T @ (w[:, None] * occ)
    np.fill_diagonal(M, 0.0)
    L = v.basis.lattice
    table = np.zeros((L.Lx, L.Ly))
    for j in range(L.n_sites):
        p, q = L.coords(j)
        for dp in range(L.Lx):
            for dq in range(L.Ly):
                pp, qq = p + dp, q + dq
                if L.is_torus:
                    pp, qq = pp % L.Lx, qq % L.Ly
                elif pp >= L.Lx or qq >= L.Ly:
                    continue
                table[dp, dq] += M[j, L.site(pp, qq)]
    return PairCorrelation(table / L.n_sites)


# --- fidelities -------------------------------------------------------------------


def _matrix(states: Sequence[StateVector]) -> np.ndarray:
    for s in states[1:]:
        check_same_basis(states[0].basis, s.basis)
    return np.stack([s.amplitudes for s in states], axis=1)


def orthonormal_span(states: Sequence[StateVector]) -> list[StateVector]:
    Q, R = np.linalg.qr(_matrix(states))
    keep = np.abs(np.diag(R)) > 1e-12
    return [StateVector(states[0].basis, Q[:, i]) for i in np.flatnonzero(keep)]


def manifold_fidelity(v: StateVector, manifold: Sequence[StateVector], ortho_tol: float = 1e-10) -> float:
    """``sum_i |<m_i|v>|^2`` for an orthonormal manifold."""
    for m in manifold:
        check_same_basis(v.basis, m.basis)
    M = _matrix(manifold)
    gram = M.conj().T @ M
    if np.abs(gram - np.eye(len(manifold))).max() > ortho_tol:
        raise ValueError("manifold vectors are not orthonormal")
    return float(np.sum(np.abs(M.conj().T @ v.amplitudes) ** 2))


@dataclass(frozen=True)
class FidelityReport:
    """Projector fidelity ``tr(P_trial P_target) / rank`` plus per-sector values."""

    projector: float
    per_sector: tuple[float, ...]
    raw_projector: float | None = None

    @property
    def best_sector(self) -> float:
        return max(self.per_sector)

    def as_dict(self) -> dict:
        out = {"projector": self.projector, "best_sector": self.best_sector, "per_sector": list(self.per_sector)}
        if self.raw_projector is not None:
            out["raw_projector"] = self.raw_projector
        return out


def fidelity_report(trial: Sequence[StateVector], target: Sequence[StateVector]) -> FidelityReport:
    """Compare trial states (e.g. Laughlin sectors) with a target manifold.

    ``target`` vectors need not be normalized or orthogonal (projected cavity
    states are neither); the target projector is built from their span.
    ``raw_projector`` keeps the target's own norms instead:
    ``sum_j ||P_trial t_j||^2 / len(target)``.
    """
    span = orthonormal_span(target)
    per = tuple(manifold_fidelity(s.normalized(), span) for s in trial)
    projector = float(np.mean(per))
    trial_span = _matrix(orthonormal_span(trial))
    T = _matrix(target)
    raw = float(np.sum(np.abs(trial_span.conj().T @ T) ** 2) / T.shape[1])
    return FidelityReport(projector, per, raw)


# --- cavity diagnostics -----------------------------------------------------------


def photon_population(v: StateVector) -> dict:
    """Fraction of the excitations stored as atoms, X photons and Y photons.

    Also reports ``photon_free``: the weight of configurations without photons.
    """
    basis = v.basis
    if not isinstance(basis, CavityBasis):
        raise BasisMismatch("photon populations need a cavity basis")
    w = _weights(v)
    w = w / w.sum()
    codes = basis.site_codes
    n_exc = np.sum(codes > 0, axis=1)
    denom = np.maximum(n_exc, 1)
    # the vacuum (N = 0) counts as purely atomic
    atomic = np.where(n_exc == 0, 1.0, np.sum(codes == ATOM, axis=1) / denom)
    out = {
        "atomic": float(w @ atomic),
        "photonX": float(w @ (np.sum(codes == PHOTON_X, axis=1) / denom)),
        "photonY": float(w @ (np.sum(codes == PHOTON_Y, axis=1) / denom)),
        "photon_free": float(w @ basis.photon_free),
    }
    return out


# --- gap curve ----------------------------------------------------------------------


@dataclass
class GapCurve:
    """Low spectrum versus pinning strength (energies in units of ``t``)."""

    epsilons: np.ndarray
    ground: np.ndarray
    gaps: np.ndarray  # (n_eps, k-1): E_i - E_0
    product_overlap: np.ndarray  # ground-state weight on the pinned product state
    meta: dict = field(default_factory=dict)

    def min_gap(self, level: int = 1) -> float:
        return float(self.gaps[:, level - 1].min())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["eps", "E0", *[f"gap{i}" for i in range(1, self.gaps.shape[1] + 1)], "product_overlap"])
            for e, g0, gaps, ov in zip(self.epsilons, self.ground, self.gaps, self.product_overlap):
                wr.writerow([repr(float(e)), repr(float(g0)), *[repr(float(x)) for x in gaps], repr(float(ov))])

    def to_json(self) -> dict:
        return {
            "epsilons": self.epsilons.tolist(),
            "ground": self.ground.tolist(),
            "gaps": self.gaps.tolist(),
            "product_overlap": self.product_overlap.tolist(),
            "meta": self.meta,
        }


def gap_curve(
    basis: HardCoreBasis,
    pattern: PhasePattern,
    pinned: Sequence[tuple[int, int]],
    epsilons: Sequence[float],
    t: float = 1.0,
    k: int = 10,
    seed: int = 0,
) -> GapCurve:
    """Diagonalize the pinned hard-core model at each ``eps`` (units of ``t``)."""
    L = basis.lattice
    sites = [L.site(p, q) for p, q in pinned]
    product = basis.index(basis.mask_of(sites)) if len(sites) == basis.N else None
    eps = np.asarray(epsilons, dtype=float)
    ground, gaps, overlap = [], [], []
    for e in eps:
        pin = PinningPotential(tuple((j, e * t) for j in sites))
        spec = lowest_eigenpairs(build_hardcore_fqh(basis, pattern, t, pin), k, seed=seed)
        ev = spec.eigenvalues / t
        ground.append(ev[0])
        gaps.append(ev[1:] - ev[0])
        overlap.append(abs(spec.vectors[product, 0]) ** 2 if product is not None else np.nan)
    return GapCurve(eps, np.array(ground), np.array(gaps), np.array(overlap), {"pinned": [list(p) for p in pinned], "k": k})


# --- export -------------------------------------------------------------------------


def write_site_csv(path, lattice, columns: dict) -> None:
    """One row per site: ``site, p, q`` and the given per-site arrays."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["site", "p", "q", *names])
        for j in range(lattice.n_sites):
            p, q = lattice.coords(j)
            wr.writerow([j, p, q, *[repr(float(columns[n][j])) for n in names]])


def write_pair_csv(path, g: PairCorrelation) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["dp", "dq", "g"])
        Lx, Ly = g.table.shape
        for dp in range(Lx):
            for dq in range(Ly):
                wr.writerow([dp, dq, repr(float(g.table[dp, dq]))])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)
