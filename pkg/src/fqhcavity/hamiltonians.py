"""Sparse Hamiltonians for the three model layers.

* ``build_single_particle`` -- one particle hopping with Peierls phases.
* ``build_hardcore_fqh`` -- the effective spin-1/2 XX model with laser phases,
  identical to hard-core bosons in the gauge field.
* ``build_cavity_model`` -- atoms exchanging excitations with X/Y cavity
  photons that hop between neighbouring cavities, in the sector with at most
  one excitation per cavity.

Matrices share a fixed sparsity pattern per basis; time-dependent runs only
refill the values (see ``HardcoreOperator`` / ``CavityOperator``).
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import BasisMismatch, ConfigError, PatternMismatch
from .hilbert import ATOM, PHOTON_X, PHOTON_Y, CavityBasis, HardCoreBasis
from .lattice import LatticeSpec, PhasePattern

HERMITIAN_TOL = 1e-13


@dataclass(eq=False)
class SparseHermitian:
    matrix: sp.csr_matrix
    basis: object = None
    meta: dict = field(default_factory=dict)
    check: bool = True

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        n, m = self.matrix.shape
        if n != m:
            raise ValueError("Hamiltonian must be square")
        if self.basis is not None and self.basis.dim != n:
            raise BasisMismatch(f"matrix dimension {n} does not match basis dimension {self.basis.dim}")
        if self.check:
            err = self.hermiticity_error()
            if err > HERMITIAN_TOL * max(1.0, self.max_abs()):
                raise ValueError(f"matrix is not Hermitian (max |H - H^dag| = {err:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def matvec(self, v):
        return self.matrix @ v

    def __matmul__(self, v):
        return self.matrix @ v

    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.getH()
        return float(np.abs(d.data).max()) if d.nnz else 0.0

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def expectation(self, v) -> float:
        v = np.asarray(v)
        return float(np.real(np.vdot(v, self.matrix @ v)) / np.real(np.vdot(v, v)))

    def export_coordinate(self, path) -> None:
        """Matrix Market coordinate file (complex, full triplet list)."""
        comment = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()) if isinstance(v, (str, int, float)))
        scipy.io.mmwrite(str(path), sp.coo_matrix(self.matrix), comment=comment, field="complex", symmetry="general")


def read_coordinate(path) -> SparseHermitian:
    return SparseHermitian(sp.csr_matrix(scipy.io.mmread(str(path))))


class _Pattern:
    """Fixed CSR structure for a list of (row, col) entries with duplicates.

    ``assemble(values)`` sums duplicate entries and returns a CSR matrix, so
    repeated builds with new values skip index bookkeeping.
    """

    def __init__(self, rows, cols, dim):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = rows * dim + cols
        uniq, self.inverse = np.unique(keys, return_inverse=True)
        self.dim = dim
        self.n_unique = len(uniq)
        self.indices = (uniq % dim).astype(np.int32)
        urows = uniq // dim
        self.indptr = np.searchsorted(urows, np.arange(dim + 1)).astype(np.int32)

    def assemble(self, values) -> sp.csr_matrix:
        values = np.asarray(values, dtype=complex)
        re = np.bincount(self.inverse, weights=values.real, minlength=self.n_unique)
        im = np.bincount(self.inverse, weights=values.imag, minlength=self.n_unique)
        return sp.csr_matrix((re + 1j * im, self.indices, self.indptr), shape=(self.dim, self.dim))


# --- pinning, parameters, budgets ------------------------------------------


@dataclass(frozen=True)
class PinningPotential:
    """Energy shifts ``-eps |1><1|`` at selected sites."""

    entries: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        entries = tuple((int(j), float(e)) for j, e in self.entries)
        sites = [j for j, _ in entries]
        if len(set(sites)) != len(sites):
            raise ConfigError("pinned sites must be distinct")
        if any(e < 0 for _, e in entries):
            raise ConfigError("pinning shifts must be non-negative")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def at(cls, lattice: LatticeSpec, coords: Iterable[tuple[int, int]], eps: float) -> "PinningPotential":
        return cls(tuple((lattice.site(p, q), eps) for p, q in coords))

    def with_strength(self, eps: float) -> "PinningPotential":
        return PinningPotential(tuple((j, eps) for j, _ in self.entries))

    def site_shifts(self, lattice: LatticeSpec) -> np.ndarray:
        out = np.zeros(lattice.n_sites)
        for j, e in self.entries:
            if not 0 <= j < lattice.n_sites:
                raise ConfigError(f"pinned site {j} is not on the lattice")
            out[j] = e
        return out


NO_PIN = PinningPotential()


@dataclass(frozen=True)
class DirectionParams:
    """Couplings of one cavity mode: atom coupling g, detuning Delta, drive Omega, hopping J."""

    g: float
    Delta: float
    Omega: float
    J: float

    def __post_init__(self):
        for name in ("g", "Delta", "J"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.Omega < 0:
            raise ConfigError("Omega must be non-negative")

    @property
    def delta(self) -> float:
        return self.g**2 / self.Delta

    @property
    def omega(self) -> float:
        return self.g * self.Omega / self.Delta

    @property
    def t(self) -> float:
        return self.J * (self.omega / self.delta) ** 2


@dataclass(frozen=True)
class CavityParams:
    x: DirectionParams
    y: DirectionParams
    rtol: float = 1e-12

    def __post_init__(self):
        tx, ty = self.x.t, self.y.t
        if abs(tx - ty) > self.rtol * max(abs(tx), abs(ty)):
            raise ConfigError(f"effective hopping differs between directions: t_x={tx!r}, t_y={ty!r}")

    @classmethod
    def symmetric(cls, g, Delta, Omega, J) -> "CavityParams":
        d = DirectionParams(g, Delta, Omega, J)
        return cls(d, d)

    @classmethod
    def from_ratios(cls, delta_over_J: float, J_over_omega: float, J: float = 1.0, t: float | None = None):
        """Isotropic parameters with the given hierarchy and ``Omega = J``.

        If ``t`` is given, ``J`` is chosen so that ``J (omega/delta)^2 = t``.
        """
        if t is not None:
            J = t * (delta_over_J * J_over_omega) ** 2
        delta = delta_over_J * J
        omega = J / J_over_omega
        Omega = J
        g = delta * Omega / omega
        Delta = g * Omega / omega
        return cls.symmetric(g, Delta, Omega, J)

    @property
    def t(self) -> float:
        return self.x.t

    def scaled_rabi(self, s: float) -> "CavityParams":
        """Scale both classical drives by ``s`` (t scales as s**2)."""
        return CavityParams(
            DirectionParams(self.x.g, self.x.Delta, s * self.x.Omega, self.x.J),
            DirectionParams(self.y.g, self.y.Delta, s * self.y.Omega, self.y.J),
            self.rtol,
        )

    def as_dict(self) -> dict:
        out = {}
        for mu, d in (("x", self.x), ("y", self.y)):
            out[mu] = {"g": d.g, "Delta": d.Delta, "Omega": d.Omega, "J": d.J, "delta": d.delta, "omega": d.omega, "t": d.t}
        return out


@dataclass(frozen=True)
class RegimeReport:
    ratios: dict
    checks: dict
    factor: float

    @property
    def passed(self) -> bool:
        """All ``g/Delta >> J/g >> Omega/Delta`` inequalities hold in both directions."""
        return all(v for k, v in self.checks.items() if not k.startswith("mode"))

    @property
    def all_passed(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        return [f"{k}: {'pass' if v else 'FAIL'}" for k, v in self.checks.items()]


def validate_regime(params: CavityParams, factor: float = 10.0) -> RegimeReport:
    """Check the parameter hierarchy needed for both adiabatic eliminations.

    ``a >> b`` passes when ``a >= factor * b`` (with a 1e-9 relative slack for
    rounding). The X/Y mode separation ``|Delta_x - Delta_y| >> g`` is reported
    separately because isotropic test points violate it by construction.
    """
    ratios, checks = {}, {}
    slack = 1 - 1e-9
    for mu, d in (("x", params.x), ("y", params.y)):
        r = {"g/Delta": d.g / d.Delta, "J/g": d.J / d.g, "Omega/Delta": d.Omega / d.Delta}
        ratios[mu] = r
        checks[f"{mu}: g/Delta >> J/g"] = r["g/Delta"] >= factor * r["J/g"] * slack
        checks[f"{mu}: J/g >> Omega/Delta"] = r["J/g"] >= factor * r["Omega/Delta"] * slack
    sep = abs(params.x.Delta - params.y.Delta)
    ratios["mode_separation"] = sep / max(params.x.g, params.y.g)
    checks["mode separation: |Delta_x - Delta_y| >> g"] = sep >= factor * max(params.x.g, params.y.g) * slack
    return RegimeReport(ratios, checks, factor)


@dataclass(frozen=True)
class DecayBudget:
    gamma: float
    Nb: int
    effective_rate: float
    t: float
    ratio: float


def decay_budget(gamma: float, Nb: int, params: CavityParams, direction: str = "x") -> DecayBudget:
    """Spontaneous-emission rate ``Nb gamma (Omega/Delta)^2`` against ``t = J (Omega/g)^2``."""
    if gamma < 0:
        raise ConfigError("decay rate must be non-negative")
    d = params.x if direction == "x" else params.y
    rate = Nb * gamma * (d.Omega / d.Delta) ** 2
    t = d.J * (d.Omega / d.g) ** 2
    return DecayBudget(gamma, Nb, rate, t, rate / t if t > 0 else math.inf)


# --- single particle ---------------------------------------------------------


def _check_pattern(lattice: LatticeSpec, pattern: PhasePattern):
    if pattern.lattice != lattice:
        raise PatternMismatch("phase pattern belongs to a different lattice")


def build_single_particle(lattice: LatticeSpec, pattern: PhasePattern, t: float = 1.0) -> SparseHermitian:
    _check_pattern(lattice, pattern)
    links = lattice.links
    amp = -t * np.exp(1j * pattern.link_phases())
    rows = np.concatenate([links.dst, links.src])
    cols = np.concatenate([links.src, links.dst])
    vals = np.concatenate([amp, amp.conj()])
    n = lattice.n_sites
    H = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseHermitian(H, meta={"model": "single-particle", "t": t})


# --- hard-core / effective XX model ----------------------------------------

_operator_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


class HardcoreOperator:
    """Hopping template of the hard-core model on a fixed basis.

    Each stored entry is a hop along link ``link[e]`` in direction
    ``sign[e]`` (+1 along the link, -1 against it), so new phases only
    require recomputing ``-t exp(i sign phase[link])``.
    """

    def __init__(self, basis: HardCoreBasis):
        self.basis = basis
        lat = basis.lattice
        links = lat.links
        occ = basis.occupations
        states = basis.states
        rows, cols, lid, sgn = [], [], [], []
        for l, (s, d) in enumerate(zip(links.src, links.dst)):
            for a, b, sign in ((s, d, 1), (d, s, -1)):
                sel = np.flatnonzero(occ[:, a] & ~occ[:, b])
                if sel.size == 0:
                    continue
                if states.dtype == object:
                    flip = (1 << int(a)) | (1 << int(b))
                    new = [int(x) ^ flip for x in states[sel]]
                else:
                    flip = np.uint64((1 << int(a)) | (1 << int(b)))
                    new = states[sel] ^ flip
                rows.append(basis.index(new))
                cols.append(sel)
                lid.append(np.full(sel.size, l))
                sgn.append(np.full(sel.size, sign))
        diag = np.arange(basis.dim)
        self.n_hops = int(sum(len(r) for r in rows))
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
        self.rows = cat(rows, np.int64)
        self.cols = cat(cols, np.int64)
        self.link = cat(lid, np.int64)
        self.sign = cat(sgn, np.int64)
        self._pattern = _Pattern(np.concatenate([self.rows, diag]), np.concatenate([self.cols, diag]), basis.dim)

    @classmethod
    def for_basis(cls, basis: HardCoreBasis) -> "HardcoreOperator":
        op = _operator_cache.get(basis)
        if op is None:
            op = cls(basis)
            _operator_cache[basis] = op
        return op

    def pin_diagonal(self, pin: PinningPotential) -> np.ndarray:
        shifts = pin.site_shifts(self.basis.lattice)
        return -(self.basis.occupations @ shifts)

    def values(self, link_phases, t, pin_diag=None) -> np.ndarray:
        """``t`` is a scalar or one hopping strength per link."""
        t_link = np.broadcast_to(np.asarray(t, dtype=float), (len(self.basis.lattice.links),))
        hop = -t_link[self.link] * np.exp(1j * self.sign * np.asarray(link_phases)[self.link])
        diag = np.zeros(self.basis.dim) if pin_diag is None else pin_diag
        return np.concatenate([hop, diag])

    def matrix(self, link_phases, t: float, pin: PinningPotential = NO_PIN, check=True) -> SparseHermitian:
        vals = self.values(link_phases, t, self.pin_diagonal(pin))
        meta = {"model": "hardcore", "t": t if np.ndim(t) == 0 else list(map(float, t))}
        return SparseHermitian(self._pattern.assemble(vals), self.basis, meta, check=check)

    def assemble(self, values) -> sp.csr_matrix:
        return self._pattern.assemble(values)


def build_hardcore_fqh(
    basis: HardCoreBasis,
    pattern: PhasePattern,
    t: float = 1.0,
    pin: PinningPotential = NO_PIN,
) -> SparseHermitian:
    """Hard-core bosons hopping with amplitude ``-t exp(i(theta_to - theta_from))``."""
    if not isinstance(basis, HardCoreBasis):
        raise BasisMismatch("build_hardcore_fqh needs a HardCoreBasis")
    _check_pattern(basis.lattice, pattern)
    H = HardcoreOperator.for_basis(basis).matrix(pattern.link_phases(), t, pin)
    H.meta.update(pattern.conventions)
    return H


# --- cavity model -------------------------------------------------------------


class CavityOperator:
    """Term-by-term template of the cavity Hamiltonian on a fixed basis.

    Entries are grouped as: diagonal (photon energies + pinning), on-site
    atom-photon exchange, and photon hopping, each with enough bookkeeping to
    recompute values for new laser phases, drive strengths or pinning.
    """

    def __init__(self, basis: CavityBasis):
        self.basis = basis
        lat = basis.lattice
        codes = basis.site_codes
        states = basis.states
        n = lat.n_sites
        obj = states.dtype == object

        def shifted(sel, delta_words):
            if obj:
                return [int(w) + int(dv) for w, dv in zip(states[sel], np.broadcast_to(delta_words, sel.shape))]
            return (states[sel].astype(np.int64) + np.asarray(delta_words, dtype=np.int64)).astype(np.uint64)

        # on-site exchange: atom |1> at j <-> photon mu at j
        ex_r, ex_c, ex_site, ex_mu = [], [], [], []
        for j in range(n):
            atom = np.flatnonzero(codes[:, j] == ATOM)
            for mu, code in ((0, PHOTON_X), (1, PHOTON_Y)):
                if atom.size == 0:
                    continue
                photon = basis.index(shifted(atom, (code - ATOM) << (2 * j)))
                ex_r.append(photon)
                ex_c.append(atom)
                ex_site.append(np.full(atom.size, j))
                ex_mu.append(np.full(atom.size, mu))
        # photon hopping along links of the photon's own axis
        hp_r, hp_c, hp_link, hp_sign = [], [], [], []
        links = lat.links
        for l, (s, d, ax) in enumerate(zip(links.src, links.dst, links.axis)):
            code = PHOTON_X if ax == 0 else PHOTON_Y
            for a, b, sign in ((s, d, 1), (d, s, -1)):
                sel = np.flatnonzero((codes[:, a] == code) & (codes[:, b] == 0))
                if sel.size == 0:
                    continue
                dw = (code << (2 * int(b))) - (code << (2 * int(a)))
                hp_r.append(basis.index(shifted(sel, dw)))
                hp_c.append(sel)
                hp_link.append(np.full(sel.size, l))
                hp_sign.append(np.full(sel.size, sign))

        cat = (lambda xs: np.concatenate(xs).astype(np.int64) if xs else np.zeros(0, np.int64))
        self.ex_rows, self.ex_cols = cat(ex_r), cat(ex_c)
        self.ex_site, self.ex_mu = cat(ex_site), cat(ex_mu)
        self.hp_rows, self.hp_cols = cat(hp_r), cat(hp_c)
        self.hp_link, self.hp_sign = cat(hp_link), cat(hp_sign)
        self.n_photon_x = (codes == PHOTON_X).sum(axis=1)
        self.n_photon_y = (codes == PHOTON_Y).sum(axis=1)
        self.atoms = codes == ATOM
        diag = np.arange(basis.dim)
        rows = np.concatenate([self.ex_rows, self.ex_cols, self.hp_rows, diag])
        cols = np.concatenate([self.ex_cols, self.ex_rows, self.hp_cols, diag])
        self._pattern = _Pattern(rows, cols, basis.dim)

    @classmethod
    def for_basis(cls, basis: CavityBasis) -> "CavityOperator":
        op = _operator_cache.get(basis)
        if op is None:
            op = cls(basis)
            _operator_cache[basis] = op
        return op

    def values(self, pattern: PhasePattern, params: CavityParams, pin: PinningPotential = NO_PIN, rabi=(1.0, 1.0)):
        """Matrix values; ``rabi`` rescales the X and Y drives (omega scales linearly)."""
        lat = self.basis.lattice
        theta = np.stack([pattern.theta_x.T.ravel(), pattern.theta_y.T.ravel()])  # [mu, site]
        omega = np.array([params.x.omega * rabi[0], params.y.omega * rabi[1]])
        # <photon| H |atom> = omega exp(-i theta); its conjugate couples back
        ex = omega[self.ex_mu] * np.exp(-1j * theta[self.ex_mu, self.ex_site])
        # phases not expressible through theta (torus twists) ride on the photon hop
        links = lat.links
        site_diff = np.where(
            links.axis == 0,
            theta[0, links.dst] - theta[0, links.src],
            theta[1, links.dst] - theta[1, links.src],
        )
        residual = pattern.link_phases() - site_diff
        J = np.where(links.axis == 0, params.x.J, params.y.J)
        hop = -J[self.hp_link] * np.exp(1j * self.hp_sign * residual[self.hp_link])
        diag = params.x.delta * self.n_photon_x + params.y.delta * self.n_photon_y
        diag = diag - self.atoms @ pin.site_shifts(lat)
        return np.concatenate([ex, ex.conj(), hop, diag])

    def assemble(self, values) -> sp.csr_matrix:
        return self._pattern.assemble(values)

    def matrix(self, pattern: PhasePattern, params: CavityParams, pin: PinningPotential = NO_PIN, check=True):
        vals = self.values(pattern, params, pin)
        meta = {"model": "cavity", "t": params.t, "delta_x": params.x.delta, "omega_x": params.x.omega, "J_x": params.x.J}
        return SparseHermitian(self._pattern.assemble(vals), self.basis, meta, check=check)


def build_cavity_model(
    basis: CavityBasis,
    pattern: PhasePattern,
    params: CavityParams,
    pin: PinningPotential = NO_PIN,
) -> SparseHermitian:
    """Atoms plus X/Y cavity photons after eliminating the excited atomic level.

    Terms: photon energy ``delta_mu`` (a photon forces the atom into |0>),
    exchange ``omega_mu (exp(i theta_mu_j) a_mu_j sigma+_j + h.c.)`` and photon
    hopping ``-J_mu`` along the photon's own axis.
    """
    if not isinstance(basis, CavityBasis):
        raise BasisMismatch("build_cavity_model needs a CavityBasis")
    _check_pattern(basis.lattice, pattern)
    H = CavityOperator.for_basis(basis).matrix(pattern, params, pin)
    H.meta.update(pattern.conventions)
    return H


def merged_cavity_basis(lattice: LatticeSpec, sectors: Sequence[int]) -> CavityBasis:
    """Union of several excitation sectors in one basis (sector-mixing checks)."""
    parts = [CavityBasis(lattice, n) for n in sectors]
    merged = object.__new__(CavityBasis)
    merged.lattice = lattice
    merged.N = tuple(sectors)
    words = sorted(int(w) for b in parts for w in b.states)
    merged.states = np.array(words, dtype=parts[0].states.dtype)
    merged.states.setflags(write=False)
    return merged
