"""Lattice geometry, Abelian gauge fields and laser-phase patterns.

Units: lattice spacing, flux quantum, hbar and charge are all 1, so a vector
potential ``A`` enters a hop from ``r`` to ``r'`` through the factor
``exp(i * 2*pi * int_r^r' A . dl)`` and ``alpha`` is the flux per plaquette.

Sites are indexed ``j = q * Lx + p``. Phases live on sites as the two laser
phase arrays ``theta_x[p, q]`` and ``theta_y[p, q]``; a hop along the x-link
leaving ``(p, q)`` carries ``theta_x[p+1, q] - theta_x[p, q]``. Torus wrap
links additionally carry a per-row (x) or per-column (y) twist, because a
non-periodic gauge cannot be written as a difference of site phases there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, FluxNotQuantized, PatternMismatch, QuadratureFailure

TWO_PI = 2.0 * math.pi


class Boundary(str, enum.Enum):
    TORUS = "torus"
    OPEN = "open"


def wrap_phase(x):
    """Reduce angles to ``(-pi, pi]``."""
    return math.pi - np.mod(math.pi - np.asarray(x, dtype=float), TWO_PI)


@dataclass(frozen=True)
class Links:
    """Directed nearest-neighbour links, x-links first then y-links.

    Every link points in the +x or +y direction; the reverse hop carries the
    conjugate phase.
    """

    src: np.ndarray
    dst: np.ndarray
    axis: np.ndarray  # 0 = x, 1 = y
    wrap: np.ndarray  # True for torus wrap links
    p: np.ndarray  # source coordinates
    q: np.ndarray

    def __len__(self):
        return len(self.src)


@dataclass(frozen=True)
class LatticeSpec:
    Lx: int
    Ly: int
    boundary: Boundary = Boundary.TORUS

    def __post_init__(self):
        if int(self.Lx) != self.Lx or int(self.Ly) != self.Ly:
            raise ConfigError("lattice dimensions must be integers")
        if self.Lx < 2 or self.Ly < 2:
            raise ConfigError(f"lattice must be at least 2x2, got {self.Lx}x{self.Ly}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    @property
    def is_torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    def site(self, p: int, q: int) -> int:
        if self.is_torus:
            p, q = p % self.Lx, q % self.Ly
        elif not (0 <= p < self.Lx and 0 <= q < self.Ly):
            raise IndexError(f"site ({p}, {q}) outside open {self.Lx}x{self.Ly} lattice")
        return q * self.Lx + p

    def coords(self, j: int) -> tuple[int, int]:
        return j % self.Lx, j // self.Lx

    @cached_property
    def positions(self) -> np.ndarray:
        """``(n_sites, 2)`` array of site coordinates ``(p, q)``."""
        j = np.arange(self.n_sites)
        return np.stack([j % self.Lx, j // self.Lx], axis=1)

    @cached_property
    def links(self) -> Links:
        src, dst, axis, wrap, ps, qs = [], [], [], [], [], []
        for ax in (0, 1):
            for q in range(self.Ly):
                for p in range(self.Lx):
                    if ax == 0:
                        at_edge = p == self.Lx - 1
                        target = ((p + 1) % self.Lx, q)
                    else:
                        at_edge = q == self.Ly - 1
                        target = (p, (q + 1) % self.Ly)
                    if at_edge and not self.is_torus:
                        continue
                    src.append(self.site(p, q))
                    dst.append(self.site(*target))
                    axis.append(ax)
                    wrap.append(at_edge)
                    ps.append(p)
                    qs.append(q)
        arrays = [np.array(a) for a in (src, dst, axis, wrap, ps, qs)]
        for a in arrays:
            a.setflags(write=False)
        return Links(*arrays)

    def plaquettes(self) -> list[tuple[int, int]]:
        """Lower-left corners of all elementary plaquettes."""
        px = self.Lx if self.is_torus else self.Lx - 1
        qy = self.Ly if self.is_torus else self.Ly - 1
        return [(p, q) for q in range(qy) for p in range(px)]

    def torus_displacement(self, dp, dq):
        """Minimum-image displacement (identity on open lattices)."""
        dp, dq = np.asarray(dp, float), np.asarray(dq, float)
        if self.is_torus:
            dp = dp - self.Lx * np.round(dp / self.Lx)
            dq = dq - self.Ly * np.round(dq / self.Ly)
        return dp, dq


@dataclass(frozen=True)
class Solenoid:
    """Infinitely thin flux tube at ``(x, y)`` carrying ``flux`` flux quanta."""

    x: float
    y: float
    flux: float = 1.0


def parse_alpha(value) -> Fraction:
    """Parse an exact rational flux density; floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError("alpha must be a rational number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if any(c in text for c in ".eE") or not text:
            raise ConfigError(f"alpha must be written as an exact fraction 'n/d', got {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse alpha {value!r}") from exc
    raise ConfigError(f"alpha must be an exact rational (int, Fraction or 'n/d' string), got {type(value).__name__}")


@dataclass(frozen=True)
class GaugeConfig:
    alpha: Fraction = Fraction(0)
    solenoids: tuple[Solenoid, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", parse_alpha(self.alpha))
        sols = tuple(s if isinstance(s, Solenoid) else Solenoid(*s) for s in self.solenoids)
        for s in sols:
            if float(s.x).is_integer() and float(s.y).is_integer():
                raise ConfigError(f"solenoid at ({s.x}, {s.y}) coincides with a lattice site")
        object.__setattr__(self, "solenoids", sols)

    @property
    def solenoid_flux(self) -> float:
        return float(sum(s.flux for s in self.solenoids))

    def total_flux(self, lattice: LatticeSpec) -> float:
        return float(self.alpha) * lattice.n_sites + self.solenoid_flux

    def check(self, lattice: LatticeSpec) -> None:
        """Raise ``FluxNotQuantized`` when the torus flux is not an integer."""
        if not lattice.is_torus:
            return
        total = self.alpha * lattice.n_sites
        if not self.solenoids and total.denominator != 1:
            raise FluxNotQuantized(
                f"alpha * Lx * Ly = {total} is not an integer on a {lattice.Lx}x{lattice.Ly} torus"
            )
        flux = self.total_flux(lattice)
        if abs(flux - round(flux)) > 1e-9:
            raise FluxNotQuantized(f"total torus flux {flux} is not an integer")

    def with_solenoids(self, solenoids: Sequence[Solenoid]) -> "GaugeConfig":
        return GaugeConfig(self.alpha, tuple(solenoids))


@dataclass(frozen=True, eq=False)
class PhasePattern:
    lattice: LatticeSpec
    theta_x: np.ndarray  # (Lx, Ly)
    theta_y: np.ndarray  # (Lx, Ly)
    twist_x: np.ndarray  # (Ly,) extra phase on the x wrap link of row q
    twist_y: np.ndarray  # (Lx,) extra phase on the y wrap link of column p
    conventions: dict = field(default_factory=dict)

    def __post_init__(self):
        L = self.lattice
        shapes = {
            "theta_x": (L.Lx, L.Ly),
            "theta_y": (L.Lx, L.Ly),
            "twist_x": (L.Ly,),
            "twist_y": (L.Lx,),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise PatternMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, lattice: LatticeSpec) -> "PhasePattern":
        return cls(
            lattice,
            np.zeros((lattice.Lx, lattice.Ly)),
            np.zeros((lattice.Lx, lattice.Ly)),
            np.zeros(lattice.Ly),
            np.zeros(lattice.Lx),
        )

    @classmethod
    def from_link_phases(cls, lattice: LatticeSpec, phases, conventions=None) -> "PhasePattern":
        """Rebuild site phases and wrap twists from one phase per link.

        ``theta_x`` is the cumulative sum along each row starting at p = 0,
        ``theta_y`` the cumulative sum up each column starting at q = 0.
        """
        phases = np.asarray(phases, dtype=float)
        links = lattice.links
        if phases.shape != (len(links),):
            raise PatternMismatch("one phase per link required")
        Lx, Ly = lattice.Lx, lattice.Ly
        tx = np.zeros((Lx, Ly))
        ty = np.zeros((Lx, Ly))
        xbulk = np.zeros((Lx, Ly))
        ybulk = np.zeros((Lx, Ly))
        wx = np.zeros(Ly)
        wy = np.zeros(Lx)
        for ph, ax, w, p, q in zip(phases, links.axis, links.wrap, links.p, links.q):
            if ax == 0:
                if w:
                    wx[q] = ph
                else:
                    xbulk[p, q] = ph
            else:
                if w:
                    wy[p] = ph
                else:
                    ybulk[p, q] = ph
        tx[1:, :] = np.cumsum(xbulk[:-1, :], axis=0)
        ty[:, 1:] = np.cumsum(ybulk[:, :-1], axis=1)
        twist_x = np.zeros(Ly)
        twist_y = np.zeros(Lx)
        if lattice.is_torus:
            twist_x = wx - (tx[0, :] - tx[-1, :])
            twist_y = wy - (ty[:, 0] - ty[:, -1])
        return cls(lattice, tx, ty, twist_x, twist_y, dict(conventions or {}))

    def link_phases(self) -> np.ndarray:
        """Phase picked up when hopping along each link of ``lattice.links``."""
        links = self.lattice.links
        Lx, Ly = self.lattice.Lx, self.lattice.Ly
        p, q = links.p, links.q
        out = np.empty(len(links))
        xs = links.axis == 0
        p1 = (p + 1) % Lx
        q1 = (q + 1) % Ly
        out[xs] = self.theta_x[p1[xs], q[xs]] - self.theta_x[p[xs], q[xs]]
        ys = ~xs
        out[ys] = self.theta_y[p[ys], q1[ys]] - self.theta_y[p[ys], q[ys]]
        wx = xs & links.wrap
        out[wx] += self.twist_x[q[wx]]
        wy = ys & links.wrap
        out[wy] += self.twist_y[p[wy]]
        return out

    def gauge_transform(self, chi) -> "PhasePattern":
        """Apply the site-local gauge transformation ``c_j -> exp(i chi_j) c_j``.

        ``chi`` is an ``(Lx, Ly)`` array or a per-site vector. Hops j -> k
        pick up ``chi_k - chi_j``.
        """
        chi = np.asarray(chi, dtype=float)
        L = self.lattice
        if chi.shape == (L.n_sites,):
            chi = chi.reshape(L.Ly, L.Lx).T
        return PhasePattern(
            self.lattice,
            self.theta_x + chi,
            self.theta_y + chi,
            self.twist_x,
            self.twist_y,
            {**self.conventions, "gauge_transformed": True},
        )

    def __add__(self, other: "PhasePattern") -> "PhasePattern":
        if other.lattice != self.lattice:
            raise PatternMismatch("cannot add phase patterns on different lattices")
        return PhasePattern(
            self.lattice,
            self.theta_x + other.theta_x,
            self.theta_y + other.theta_y,
            self.twist_x + other.twist_x,
            self.twist_y + other.twist_y,
            {**other.conventions, **self.conventions},
        )

    def scaled(self, factor: float) -> "PhasePattern":
        return PhasePattern(
            self.lattice,
            factor * self.theta_x,
            factor * self.theta_y,
            factor * self.twist_x,
            factor * self.twist_y,
            dict(self.conventions),
        )


def landau_phases(lattice: LatticeSpec, gauge: GaugeConfig) -> PhasePattern:
    """Landau-gauge laser phases ``theta_x = -2 pi alpha p q``, ``theta_y = 0``.

    On a torus the wrap twists are chosen so that every plaquette, including
    those straddling the seams, encloses the same flux.
    """
    if gauge.solenoids:
        raise ConfigError("landau_phases takes a uniform field only; use general_gauge_phases for solenoids")
    gauge.check(lattice)
    a = float(gauge.alpha)
    p = np.arange(lattice.Lx)[:, None]
    q = np.arange(lattice.Ly)[None, :]
    theta_x = -TWO_PI * a * p * q
    theta_y = np.zeros((lattice.Lx, lattice.Ly))
    twist_x = np.zeros(lattice.Ly)
    twist_y = np.zeros(lattice.Lx)
    if lattice.is_torus:
        twist_x = -TWO_PI * a * lattice.Lx * np.arange(lattice.Ly)
        twist_y = TWO_PI * a * lattice.Ly * np.arange(lattice.Lx)
    conv = {"gauge": "landau", "alpha": str(gauge.alpha), "A": "(-alpha*y, 0)"}
    return PhasePattern(lattice, theta_x, theta_y, twist_x, twist_y, conv)


# --- quadrature -----------------------------------------------------------

_GL_LOW = np.polynomial.legendre.leggauss(8)
_GL_HIGH = np.polynomial.legendre.leggauss(16)


def _gauss(f, a, b, rule):
    x, w = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * np.sum(w * f(mid + half * x))


def adaptive_gauss_legendre(f, a, b, tol=1e-10, max_depth=40):
    """Integrate ``f`` over ``[a, b]`` by recursive bisection of 8/16-point rules.

    ``f`` must accept a numpy array of abscissae.
    """

    def rec(a, b, tol, depth):
        lo = _gauss(f, a, b, _GL_LOW)
        hi = _gauss(f, a, b, _GL_HIGH)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise QuadratureFailure(f"integrand not finite on [{a}, {b}]")
        if abs(hi - lo) <= tol:
            return hi
        if depth >= max_depth:
            raise QuadratureFailure(f"quadrature did not converge on [{a}, {b}]")
        m = 0.5 * (a + b)
        return rec(a, m, 0.5 * tol, depth + 1) + rec(m, b, 0.5 * tol, depth + 1)

    return rec(a, b, tol, 0)


VectorPotential = Callable[[np.ndarray, np.ndarray], tuple]


def _eval_potential(A, x, y):
    try:
        ax, ay = A(x, y)
        ax = np.broadcast_to(np.asarray(ax, dtype=float), np.shape(x))
        ay = np.broadcast_to(np.asarray(ay, dtype=float), np.shape(x))
    except (TypeError, ValueError):
        vals = [A(float(xi), float(yi)) for xi, yi in zip(np.ravel(x), np.ravel(y))]
        ax = np.array([v[0] for v in vals], dtype=float).reshape(np.shape(x))
        ay = np.array([v[1] for v in vals], dtype=float).reshape(np.shape(x))
    return ax, ay


def _segment_integral(A, a, b, tol):
    """``2 pi * int_a^b A . dl`` along the straight segment a -> b."""
    (x0, y0), (x1, y1) = a, b
    dx, dy = x1 - x0, y1 - y0

    def integrand(s):
        ax, ay = _eval_potential(A, x0 + s * dx, y0 + s * dy)
        return ax * dx + ay * dy

    return TWO_PI * adaptive_gauss_legendre(integrand, 0.0, 1.0, tol=tol / TWO_PI)


def solenoid_angle(a, b, sol: Solenoid) -> float:
    """Phase ``flux * (change of azimuth)`` of the potential ``flux/(2 pi r)`` along a -> b."""
    (x0, y0), (x1, y1) = a, b
    u = complex(x0 - sol.x, y0 - sol.y)
    v = complex(x1 - sol.x, y1 - sol.y)
    # the segment passes through the flux tube iff 0 lies on [u, v]
    cross = u.real * v.imag - u.imag * v.real
    if abs(cross) < 1e-12 and (u.real * v.real + u.imag * v.imag) <= 0.0:
        raise QuadratureFailure(f"solenoid at ({sol.x}, {sol.y}) lies on the path {a} -> {b}")
    return sol.flux * math.atan2(cross, u.real * v.real + u.imag * v.imag)


def _path_phase(A, sols, a, b, tol):
    ph = _segment_integral(A, a, b, tol) if A is not None else 0.0
    for s in sols:
        ph += solenoid_angle(a, b, s)
    return ph


def general_gauge_phases(
    lattice: LatticeSpec,
    A: VectorPotential | None,
    gauge: GaugeConfig,
    tol: float = 1e-10,
) -> PhasePattern:
    """Laser phases for an arbitrary vector potential plus solenoids.

    Each link phase is ``2 pi`` times the line integral of ``A`` along the
    straight link, plus the azimuthal winding of every solenoid. Site phases
    follow from integrating along rows (x) from p = 0 and columns (y) from
    q = 0. On a torus the wrap links are re-derived from the flux through the
    seam plaquettes, with the holonomies of row 0 and column 0 anchored to
    their straight-line integrals; this requires the total flux through the
    torus to be an integer.
    """
    sols = gauge.solenoids
    links = lattice.links
    phases = np.empty(len(links))
    for i, (ax, p, q) in enumerate(zip(links.axis, links.p, links.q)):
        a = (float(p), float(q))
        b = (p + 1.0, float(q)) if ax == 0 else (float(p), q + 1.0)
        phases[i] = _path_phase(A, sols, a, b, tol)
    conv = {
        "gauge": "general",
        "paths": "straight lines along rows from p=0 and columns from q=0",
        "solenoids": [(s.x, s.y, s.flux) for s in sols],
    }
    if lattice.is_torus:
        phases = _repair_seams(lattice, A, sols, phases, tol)
        conv["torus_seams"] = "wrap links fixed by seam-plaquette flux; row 0 / column 0 holonomy anchored"
    return PhasePattern.from_link_phases(lattice, phases, conv)


def _repair_seams(lattice, A, sols, phases, tol):
    Lx, Ly = lattice.Lx, lattice.Ly
    links = lattice.links
    x = np.zeros((Lx, Ly))
    y = np.zeros((Lx, Ly))
    x_id = np.zeros((Lx, Ly), dtype=int)
    y_id = np.zeros((Lx, Ly), dtype=int)
    for i, (ax, p, q) in enumerate(zip(links.axis, links.p, links.q)):
        if ax == 0:
            x[p, q], x_id[p, q] = phases[i], i
        else:
            y[p, q], y_id[p, q] = phases[i], i

    def circ(p, q):
        # circulation of the geometric plaquette [p, p+1] x [q, q+1] in the plane
        c = [(p, q), (p + 1, q), (p + 1, q + 1), (p, q + 1), (p, q)]
        return sum(_path_phase(A, sols, c[k], c[k + 1], tol) for k in range(4))

    n_flux = sum(circ(p, q) for p in range(Lx) for q in range(Ly)) / TWO_PI
    if abs(n_flux - round(n_flux)) > 1e-7:
        raise FluxNotQuantized(f"total flux through the torus is {n_flux}, not an integer")

    # x wrap links of rows 1.. from the flux of the seam column plaquettes
    for q in range(Ly - 1):
        x[Lx - 1, q + 1] = x[Lx - 1, q] + y[0, q] - y[Lx - 1, q] - circ(Lx - 1, q)
    for p in range(Lx - 1):
        y[p + 1, Ly - 1] = circ(p, Ly - 1) - x[p, Ly - 1] + x[p, 0] + y[p, Ly - 1]
    out = phases.copy()
    for q in range(Ly):
        out[x_id[Lx - 1, q]] = x[Lx - 1, q]
    for p in range(Lx):
        out[y_id[p, Ly - 1]] = y[p, Ly - 1]
    return out


def plaquette_circulation(pattern: PhasePattern, p: int, q: int) -> float:
    """Unreduced counterclockwise sum of hop phases around plaquette (p, q)."""
    L = pattern.lattice
    if not L.is_torus and not (0 <= p < L.Lx - 1 and 0 <= q < L.Ly - 1):
        raise IndexError(f"no plaquette with lower-left corner ({p}, {q})")
    lp = _link_lookup(pattern)
    p, q = p % L.Lx, q % L.Ly
    p1, q1 = (p + 1) % L.Lx, (q + 1) % L.Ly
    return lp[(0, p, q)] + lp[(1, p1, q)] - lp[(0, p, q1)] - lp[(1, p, q)]


def _link_lookup(pattern):
    links = pattern.lattice.links
    ph = pattern.link_phases()
    return {(int(a), int(p), int(q)): v for a, p, q, v in zip(links.axis, links.p, links.q, ph)}


def plaquette_flux(pattern: PhasePattern, lattice: LatticeSpec, p: int, q: int) -> float:
    """Aharonov-Bohm phase of plaquette (p, q) in ``(-pi, pi]``.

    Sign follows the Peierls factor ``exp(-i 2 pi Phi)``: a plaquette pierced by
    flux ``Phi`` (uniform ``alpha`` plus solenoids, counterclockwise
    circulation positive) returns ``-2 pi Phi`` reduced mod 2 pi.
    """
    if pattern.lattice != lattice:
        raise PatternMismatch("pattern belongs to a different lattice")
    return float(wrap_phase(-plaquette_circulation(pattern, p, q)))


def all_plaquette_fluxes(pattern: PhasePattern) -> np.ndarray:
    """``(Lx, Ly)`` array (NaN where no plaquette exists on open lattices)."""
    L = pattern.lattice
    out = np.full((L.Lx, L.Ly), np.nan)
    for p, q in L.plaquettes():
        out[p, q] = plaquette_flux(pattern, L, p, q)
    return out


def magnetic_translation(pattern: PhasePattern, dp: int, dq: int):
    """Site permutation and gauge phases of a magnetic translation.

    Returns ``(perm, chi)`` such that the single-particle operator
    ``c_j -> exp(i chi[perm[j]]) c_{perm[j]}`` commutes with every hopping
    Hamiltonian built from ``pattern``. Raises ``ValueError`` when the shift is
    not a symmetry of the pattern.
    """
    L = pattern.lattice
    if not L.is_torus:
        raise ValueError("magnetic translations require a torus")
    n = L.n_sites
    perm = np.array([L.site(*(np.array(L.coords(j)) + (dp, dq))) for j in range(n)])
    links = L.links
    ph = pattern.link_phases()
    # reverse hop carries the negative phase
    neigh = {j: [] for j in range(n)}
    for s, d, v in zip(links.src, links.dst, ph):
        neigh[int(s)].append((int(d), v))
        neigh[int(d)].append((int(s), -v))
    # chi on image sites: phi'(Pj -> Pk) = phi(j -> k) + chi(Pk) - chi(Pj)
    chi = np.full(n, np.nan)
    chi[perm[0]] = 0.0
    stack = [0]
    while stack:
        j = stack.pop()
        for k, v in neigh[j]:
            target = _hop_phase(neigh, perm[j], perm[k])
            val = chi[perm[j]] + target - v
            if np.isnan(chi[perm[k]]):
                chi[perm[k]] = val
                stack.append(k)
    for j in range(n):
        for k, v in neigh[j]:
            target = _hop_phase(neigh, perm[j], perm[k])
            if abs(wrap_phase(chi[perm[k]] - chi[perm[j]] + v - target)) > 1e-9:
                raise ValueError(f"translation by ({dp}, {dq}) is not a symmetry of this pattern")
    return perm, chi


def _hop_phase(neigh, j, k):
    for kk, v in neigh[j]:
        if kk == k:
            return v
    raise ValueError("image of a link is not a link")
