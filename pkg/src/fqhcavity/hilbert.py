"""Bit-packed many-body bases and state vectors.

Two sectors are enumerated:

* ``HardCoreBasis`` -- one bit per site (set = atom in |1>), fixed particle
  number ``N``. This is the hard-core boson / spin-1/2 XX sector.
* ``CavityBasis`` -- two bits per site encoding {0: atom |0> and no photon,
  1: atom |1>, 2: one X photon, 3: one Y photon}; at most one excitation per
  cavity and ``N`` excitations in total.

States are kept sorted by their integer code so lookups are binary searches.
Lattices too large for one 64-bit word fall back to Python integers.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from pathlib import Path

import numpy as np

from .errors import BasisMismatch, TooManyParticles
from .lattice import Boundary, LatticeSpec

GROUND, ATOM, PHOTON_X, PHOTON_Y = 0, 1, 2, 3


def gosper_masks(n_sites: int, n: int) -> list[int]:
    """All ``n``-bit subsets of ``n_sites`` bits in ascending order."""
    if n == 0:
        return [0]
    out = []
    x = (1 << n) - 1
    limit = 1 << n_sites
    while x < limit:
        out.append(x)
        u = x & -x
        v = x + u
        x = v + (((v ^ x) // u) >> 2)
    return out


def popcount(x: int) -> int:
    return bin(x).count("1")


def _as_array(codes: list[int], bits: int) -> np.ndarray:
    if bits <= 64:
        return np.array(codes, dtype=np.uint64)
    arr = np.empty(len(codes), dtype=object)
    arr[:] = codes
    return arr


class _SortedBasis:
    lattice: LatticeSpec
    N: int
    states: np.ndarray
    kind: str = ""

    def __len__(self):
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, codes):
        """Ordinal(s) of encoded state(s); raises ``KeyError`` if absent."""
        scalar = np.ndim(codes) == 0
        if self.states.dtype == object:
            codes_arr = np.empty(np.size(codes), dtype=object)
            codes_arr[:] = list(np.ravel(np.asarray(codes, dtype=object)))
        else:
            codes_arr = np.atleast_1d(np.asarray(codes, dtype=np.uint64))
        pos = np.searchsorted(self.states, codes_arr)
        pos = np.minimum(pos, len(self.states) - 1)
        if not np.all(self.states[pos] == codes_arr):
            raise KeyError("state not in basis")
        return int(pos[0]) if scalar else pos.astype(np.int64)

    def contains(self, codes) -> np.ndarray:
        codes_arr = np.atleast_1d(np.asarray(codes, dtype=self.states.dtype))
        pos = np.minimum(np.searchsorted(self.states, codes_arr), len(self.states) - 1)
        return self.states[pos] == codes_arr

    @cached_property
    def descriptor_hash(self) -> str:
        h = hashlib.sha256()
        L = self.lattice
        h.update(f"{self.kind}:{L.Lx}x{L.Ly}:{L.boundary.value}:N={self.N}".encode())
        if self.states.dtype == object:
            h.update(",".join(str(int(s)) for s in self.states).encode())
        else:
            h.update(self.states.astype("<u8").tobytes())
        return h.hexdigest()

    def descriptor(self) -> dict:
        L = self.lattice
        return {
            "kind": self.kind,
            "Lx": L.Lx,
            "Ly": L.Ly,
            "boundary": L.boundary.value,
            "N": self.N,
            "dim": self.dim,
            "hash": self.descriptor_hash,
        }


class HardCoreBasis(_SortedBasis):
    kind = "hardcore"

    def __init__(self, lattice: LatticeSpec, N: int):
        n = lattice.n_sites
        if N < 0:
            raise ValueError("particle number must be non-negative")
        if N > n:
            raise TooManyParticles(f"{N} hard-core bosons do not fit on {n} sites")
        self.lattice = lattice
        self.N = N
        self.states = _as_array(gosper_masks(n, N), n)
        self.states.setflags(write=False)

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, n_sites)`` boolean occupation table."""
        n = self.lattice.n_sites
        if self.states.dtype == object:
            return np.array([[(int(s) >> j) & 1 for j in range(n)] for s in self.states], dtype=bool)
        bits = np.arange(n, dtype=np.uint64)
        return ((self.states[:, None] >> bits[None, :]) & np.uint64(1)).astype(bool)

    def mask_of(self, sites) -> int:
        m = 0
        for j in sites:
            m |= 1 << int(j)
        return m

    def product_state(self, sites) -> "StateVector":
        sites = list(sites)
        if len(set(sites)) != self.N:
            raise BasisMismatch(f"need {self.N} distinct occupied sites, got {sites}")
        amp = np.zeros(self.dim, dtype=complex)
        amp[self.index(self.mask_of(sites))] = 1.0
        return StateVector(self, amp)


class CavityBasis(_SortedBasis):
    kind = "cavity"

    def __init__(self, lattice: LatticeSpec, N: int):
        n = lattice.n_sites
        if N < 0:
            raise ValueError("excitation number must be non-negative")
        if N > n:
            raise TooManyParticles(f"{N} excitations exceed one per cavity on {n} sites")
        self.lattice = lattice
        self.N = N
        words = []
        kinds = list(product((ATOM, PHOTON_X, PHOTON_Y), repeat=N))
        for mask in gosper_masks(n, N):
            sites = [j for j in range(n) if (mask >> j) & 1]
            for ks in kinds:
                w = 0
                for j, k in zip(sites, ks):
                    w |= k << (2 * j)
                words.append(w)
        words.sort()
        self.states = _as_array(words, 2 * n)
        self.states.setflags(write=False)

    @cached_property
    def site_codes(self) -> np.ndarray:
        """``(dim, n_sites)`` table of per-site codes 0..3."""
        n = self.lattice.n_sites
        if self.states.dtype == object:
            return np.array([[(int(s) >> (2 * j)) & 3 for j in range(n)] for s in self.states], dtype=np.int8)
        shifts = (2 * np.arange(n)).astype(np.uint64)
        return ((self.states[:, None] >> shifts[None, :]) & np.uint64(3)).astype(np.int8)

    @cached_property
    def photon_free(self) -> np.ndarray:
        return np.all(self.site_codes <= ATOM, axis=1)

    @cached_property
    def atomic_masks(self) -> np.ndarray:
        """Bit-mask of atoms in |1> for every state."""
        occ = self.site_codes == ATOM
        n = self.lattice.n_sites
        weights = [1 << j for j in range(n)]
        if n <= 64:
            return (occ.astype(np.uint64) * np.array(weights, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
        out = np.empty(self.dim, dtype=object)
        out[:] = [sum(w for w, o in zip(weights, row) if o) for row in occ]
        return out

    def encode(self, codes) -> int:
        w = 0
        for j, c in enumerate(codes):
            w |= int(c) << (2 * j)
        return w


def build_hardcore_basis(lattice: LatticeSpec, N: int) -> HardCoreBasis:
    return HardCoreBasis(lattice, N)


def build_cavity_basis(lattice: LatticeSpec, N: int) -> CavityBasis:
    return CavityBasis(lattice, N)


@dataclass(eq=False)
class StateVector:
    basis: _SortedBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dim,):
            raise BasisMismatch(f"{self.amplitudes.shape} amplitudes for a basis of dimension {self.basis.dim}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / nrm)

    def is_normalized(self, tol=1e-12) -> bool:
        return abs(self.norm() - 1.0) < tol

    def vdot(self, other: "StateVector") -> complex:
        check_same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def save(self, path) -> None:
        write_state(path, self)


def check_same_basis(a, b) -> None:
    if a is b:
        return
    if a.kind != b.kind or a.lattice != b.lattice or a.N != b.N or a.dim != b.dim:
        raise BasisMismatch(f"bases differ: {a.descriptor()} vs {b.descriptor()}")


def project_to_atomic(v: StateVector, target: HardCoreBasis | None = None) -> StateVector:
    """Copy photon-free amplitudes into the hard-core basis (no renormalization)."""
    basis = v.basis
    if not isinstance(basis, CavityBasis):
        raise BasisMismatch("project_to_atomic expects a vector over a CavityBasis")
    if target is None:
        target = HardCoreBasis(basis.lattice, basis.N)
    elif target.lattice != basis.lattice or target.N != basis.N:
        raise BasisMismatch("hard-core basis must share lattice and N with the cavity basis")
    free = np.flatnonzero(basis.photon_free)
    out = np.zeros(target.dim, dtype=complex)
    out[target.index(basis.atomic_masks[free])] = v.amplitudes[free]
    return StateVector(target, out)


def embed_atomic(v: StateVector, target: CavityBasis) -> StateVector:
    """Inverse of ``project_to_atomic`` on the photon-free subspace."""
    if not isinstance(v.basis, HardCoreBasis):
        raise BasisMismatch("embed_atomic expects a hard-core vector")
    if target.lattice != v.basis.lattice or target.N != v.basis.N:
        raise BasisMismatch("bases must share lattice and N")
    free = np.flatnonzero(target.photon_free)
    out = np.zeros(target.dim, dtype=complex)
    out[free] = v.amplitudes[v.basis.index(target.atomic_masks[free])]
    return StateVector(target, out)


def transform_state(v: StateVector, perm, chi) -> StateVector:
    """Apply ``c_j -> exp(i chi[perm[j]]) c_{perm[j]}`` to a hard-core state."""
    basis = v.basis
    if not isinstance(basis, HardCoreBasis):
        raise BasisMismatch("site transformations are implemented for hard-core states")
    occ = basis.occupations
    n = basis.lattice.n_sites
    perm = np.asarray(perm)
    new_occ = np.zeros_like(occ)
    new_occ[:, perm] = occ
    phase = np.exp(1j * (occ * np.asarray(chi)[perm][None, :]).sum(axis=1))
    weights = [1 << j for j in range(n)]
    if basis.states.dtype == object:
        codes = [sum(w for w, o in zip(weights, row) if o) for row in new_occ]
    else:
        codes = (new_occ.astype(np.uint64) * np.array(weights, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)
    out = np.zeros(basis.dim, dtype=complex)
    out[basis.index(codes)] = phase * v.amplitudes
    return StateVector(basis, out)


# --- binary state files ------------------------------------------------------

_MAGIC = b"FQHSTATE"


def write_state(path, v: StateVector) -> None:
    """Header (magic, JSON length, JSON basis descriptor) then little-endian complex128."""
    header = json.dumps(v.basis.descriptor(), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(v.amplitudes, dtype="<c16").tobytes())


def read_state_header(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a state file")
        (n,) = struct.unpack("<I", fh.read(4))
        return json.loads(fh.read(n))


def read_state(path, basis: _SortedBasis | None = None) -> StateVector:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a state file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        amps = np.frombuffer(fh.read(), dtype="<c16").astype(complex)
    if basis is None:
        lat = LatticeSpec(header["Lx"], header["Ly"], Boundary(header["boundary"]))
        cls = HardCoreBasis if header["kind"] == "hardcore" else CavityBasis
        basis = cls(lat, header["N"])
    if basis.descriptor_hash != header["hash"]:
        raise BasisMismatch("state file was written for a different basis")
    return StateVector(basis, amps)


def sector_dimension(kind: str, n_sites: int, N: int) -> int:
    base = math.comb(n_sites, N)
    return base if kind == "hardcore" else base * 3**N
