"""Lowest eigenpairs of sparse Hermitian matrices.

``lowest_eigenpairs`` runs a thick-restart block Lanczos iteration: blocks of
Krylov vectors are grown with full reorthogonalization, a Rayleigh-Ritz step
picks the lowest Ritz pairs, and the best of them seed the next cycle together
with the residual block. A block size of at least two keeps exactly degenerate
pairs (the torus ground doublet) from hiding each other.

``dense_all_eigenpairs`` is the LAPACK oracle used for small problems and tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionTooLarge, NoConvergence
from .hamiltonians import SparseHermitian
from .hilbert import StateVector

DENSE_CAP = 4096
RESIDUAL_TOL = 1e-8


@dataclass(eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # (dim, k), columns orthonormal
    residuals: np.ndarray
    basis: object = None
    cluster_tol: float = 1e-8
    converged: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def clusters(self) -> list[list[int]]:
        return cluster_indices(self.eigenvalues, self.cluster_tol)

    def state(self, i: int) -> StateVector:
        return StateVector(self.basis, self.vectors[:, i]) if self.basis is not None else self.vectors[:, i]

    def states(self, indices=None) -> list:
        idx = range(self.k) if indices is None else indices
        return [self.state(i) for i in idx]

    def ground_manifold(self, window: float | None = None) -> list:
        """Eigenvectors within ``window`` of the lowest eigenvalue (default: first cluster)."""
        if window is None:
            idx = self.clusters[0]
        else:
            idx = [i for i, e in enumerate(self.eigenvalues) if e - self.eigenvalues[0] <= window]
        return self.states(idx)

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
            "clusters": self.clusters,
            "cluster_tol": self.cluster_tol,
            "converged": self.converged,
            "basis": self.basis.descriptor() if self.basis is not None else None,
            "meta": self.meta,
        }

    def save(self, stem) -> None:
        """``<stem>.json`` metadata and ``<stem>.bin`` column-major complex128 vectors."""
        stem = Path(stem)
        stem.with_suffix(".json").write_text(json.dumps(self.to_json(), indent=2))
        np.asfortranarray(self.vectors, dtype="<c16").T.tofile(stem.with_suffix(".bin"))


def cluster_indices(values, tol: float) -> list[list[int]]:
    """Group consecutive ascending values whose spacing is below ``tol``."""
    out: list[list[int]] = []
    for i, v in enumerate(values):
        if out and v - values[out[-1][-1]] < tol:
            out[-1].append(i)
        else:
            out.append([i])
    return out


def _as_operator(H):
    if isinstance(H, SparseHermitian):
        return H.matrix, H.basis
    return H, None


def _residuals(A, vals, vecs):
    R = A @ vecs - vecs * vals[None, :]
    return np.linalg.norm(R, axis=0)


def dense_all_eigenpairs(H, cap: int = DENSE_CAP, cluster_tol: float = 1e-8) -> Spectrum:
    A, basis = _as_operator(H)
    n = A.shape[0]
    if n > cap:
        raise DimensionTooLarge(f"dimension {n} exceeds the dense cap {cap}")
    M = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    vals, vecs = np.linalg.eigh(M)
    res = _residuals(A, vals, vecs)
    return Spectrum(vals, vecs, res, basis, cluster_tol, True, {"method": "dense"})


def _orthonormalize(W, V, n_prev):
    """Project ``W`` off the first ``n_prev`` columns of ``V`` (twice) and QR it.

    Returns the new orthonormal columns, dropping numerically dependent ones.
    """
    for _ in range(2):
        if n_prev:
            Vp = V[:, :n_prev]
            W = W - Vp @ (Vp.conj().T @ W)
    Q, R = np.linalg.qr(W)
    keep = np.abs(np.diag(R)) > 1e-10 * max(1.0, np.abs(R).max())
    Q = Q[:, keep]
    if Q.shape[1] and n_prev:
        Vp = V[:, :n_prev]
        Q = Q - Vp @ (Vp.conj().T @ Q)
        Q, _ = np.linalg.qr(Q)
    return Q


def lowest_eigenpairs(
    H,
    k: int,
    tol: float = 1e-10,
    *,
    block: int | None = None,
    ncv: int | None = None,
    max_restarts: int = 2000,
    seed: int = 0,
    cluster_tol: float = 1e-8,
    method: str = "lanczos",
    v0=None,
) -> Spectrum:
    """Return the ``k`` lowest eigenpairs, ascending.

    Convergence requires ``||H v - lambda v|| <= tol * max(1, |lambda|)`` for all
    ``k`` pairs. ``method="auto"`` switches to the dense oracle when the
    dimension is at most ``4 * ncv``; ``method="dense"`` always does.
    The starting block is drawn from ``numpy.random.default_rng(seed)``.
    """
    A, basis = _as_operator(H)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be between 1 and {n}")
    b = block or max(2, min(4, k))
    b = min(b, n)
    m = ncv or max(2 * k + 4 * b, 120)
    m = min(m, n)
    if method == "dense" or (method == "auto" and n <= max(4 * m, 256)):
        sp = dense_all_eigenpairs(H, cap=max(DENSE_CAP, n), cluster_tol=cluster_tol)
        return Spectrum(
            sp.eigenvalues[:k], sp.vectors[:, :k], sp.residuals[:k], basis, cluster_tol, True,
            {"method": "dense", "seed": seed},
        )

    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
    if v0 is not None:
        v0 = np.asarray(v0, dtype=complex).reshape(n, -1)
        X0[:, : v0.shape[1]] = v0[:, :b]
    V = np.zeros((n, m), dtype=complex)
    AV = np.zeros((n, m), dtype=complex)
    Q = _orthonormalize(X0, V, 0)
    V[:, : Q.shape[1]] = Q
    AV[:, : Q.shape[1]] = A @ Q
    filled = Q.shape[1]
    newest = slice(0, filled)
    keep = min(m - b, max(k + b, (m + k) // 2))
    matvecs = filled
    vals = vecs = res = None
    for restart in range(max_restarts):
        # grow the Krylov space block by block
        while filled < m:
            W = AV[:, newest]
            step = min(W.shape[1], m - filled)
            Qn = _orthonormalize(W[:, :step], V, filled)
            if Qn.shape[1] == 0:
                Qn = _orthonormalize(rng.standard_normal((n, step)) + 0j, V, filled)
                if Qn.shape[1] == 0:
                    break
            c = Qn.shape[1]
            V[:, filled : filled + c] = Qn
            AV[:, filled : filled + c] = A @ Qn
            matvecs += c
            newest = slice(filled, filled + c)
            filled += c
        Vf, AVf = V[:, :filled], AV[:, :filled]
        T = Vf.conj().T @ AVf
        T = 0.5 * (T + T.conj().T)
        theta, Y = np.linalg.eigh(T)
        kk = min(k, filled)
        X = Vf @ Y[:, :kk]
        AX = AVf @ Y[:, :kk]
        R = AX - X * theta[None, :kk]
        res = np.linalg.norm(R, axis=0)
        vals, vecs = theta[:kk], X
        thresh = tol * np.maximum(1.0, np.abs(vals))
        if kk == k and np.all(res <= thresh):
            return _finish(A, basis, vals, vecs, cluster_tol, seed, restart, matvecs)
        if filled >= n:
            break
        # thick restart: lowest Ritz vectors, then continue from their residuals
        p = min(keep, filled)
        Xr = Vf @ Y[:, :p]
        AXr = AVf @ Y[:, :p]
        V[:, :p], AV[:, :p] = Xr, AXr
        V[:, p:], AV[:, p:] = 0, 0
        filled = p
        Rb = AXr[:, :kk] - Xr[:, :kk] * theta[None, :kk]
        order = np.argsort(-(res / thresh))[:b]
        Qn = _orthonormalize(Rb[:, order], V, filled)
        if Qn.shape[1] == 0:
            continue
        c = Qn.shape[1]
        V[:, filled : filled + c] = Qn
        AV[:, filled : filled + c] = A @ Qn
        matvecs += c
        newest = slice(filled, filled + c)
        filled += c
    partial = Spectrum(vals, vecs, res, basis, cluster_tol, False, {"method": "lanczos", "seed": seed, "matvecs": matvecs})
    if vals is not None and len(vals) == k and np.all(res <= tol * np.maximum(1.0, np.abs(vals))):
        return _finish(A, basis, vals, vecs, cluster_tol, seed, max_restarts, matvecs)
    raise NoConvergence(f"lowest {k} eigenpairs not converged after {max_restarts} restarts", partial=partial)


def _finish(A, basis, vals, vecs, cluster_tol, seed, restarts, matvecs):
    # Ritz vectors are orthonormal up to rounding; re-orthonormalize within the set
    Q, _ = np.linalg.qr(vecs)
    T = Q.conj().T @ (A @ Q)
    T = 0.5 * (T + T.conj().T)
    w, Y = np.linalg.eigh(T)
    vecs = Q @ Y
    res = _residuals(A, w, vecs)
    meta = {"method": "lanczos", "seed": seed, "restarts": restarts, "matvecs": matvecs}
    return Spectrum(w, vecs, res, basis, cluster_tol, True, meta)
