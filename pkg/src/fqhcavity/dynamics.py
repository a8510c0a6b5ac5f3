"""Time-dependent propagation: ramp schedules, Krylov steps, preparation and flux insertion.

Times are measured in units of ``1/t`` where ``t`` is the context's energy
scale (the effective hopping). Within each step the Hamiltonian is frozen at
the step midpoint and ``exp(-i H dt) psi`` is applied by a Lanczos
approximation with an a-posteriori error estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import NormDrift, NumericalError, ScheduleError
from .hamiltonians import (
    NO_PIN,
    CavityOperator,
    CavityParams,
    HardcoreOperator,
    PinningPotential,
)
from .hilbert import CavityBasis, HardCoreBasis, StateVector, write_state
from .lattice import GaugeConfig, LatticeSpec, PhasePattern, Solenoid, general_gauge_phases

NORM_TOL = 1e-8


# --- schedules -----------------------------------------------------------------


@dataclass(frozen=True)
class Controls:
    """Control tuple along a schedule.

    ``eps`` multiplies the context's pinning shifts and is in units of the
    energy scale ``t``; ``rabi_x``/``rabi_y`` scale the drives relative to
    their configured values; ``flux`` is the solenoid flux in flux quanta.
    """

    eps: float = 0.0
    rabi_x: float = 1.0
    rabi_y: float = 1.0
    flux: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.eps, self.rabi_x, self.rabi_y, self.flux])

    @classmethod
    def from_array(cls, a) -> "Controls":
        return cls(*map(float, a))


def smoothstep(s):
    return s * s * (3.0 - 2.0 * s)


SHAPES: dict[str, Callable] = {"linear": lambda s: s, "smoothstep": smoothstep}


@dataclass(frozen=True)
class Segment:
    start: Controls
    end: Controls
    weight: float = 1.0
    shape: str = "linear"

    def at(self, s: float) -> Controls:
        f = SHAPES[self.shape](min(max(s, 0.0), 1.0))
        return Controls.from_array((1 - f) * self.start.as_array() + f * self.end.as_array())


@dataclass(frozen=True)
class RampSchedule:
    """Piecewise control path over total time ``T``; segment durations are ``T * weight / sum(weights)``."""

    T: float
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ScheduleError("a schedule needs at least one segment")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ScheduleError("total time must be finite and non-negative")
        for s in segs:
            if s.shape not in SHAPES:
                raise ScheduleError(f"unknown ramp shape {s.shape!r}")
            if not s.weight > 0:
                raise ScheduleError("segment weights must be positive")
        for a, b in zip(segs, segs[1:]):
            if not np.allclose(a.end.as_array(), b.start.as_array(), rtol=0, atol=1e-12):
                raise ScheduleError("controls jump between consecutive segments")

    @property
    def boundaries(self) -> np.ndarray:
        w = np.array([s.weight for s in self.segments])
        return np.concatenate([[0.0], np.cumsum(w) / w.sum()])

    def at(self, tau: float) -> Controls:
        """Controls at normalized time ``tau`` in [0, 1]."""
        b = self.boundaries
        i = int(np.clip(np.searchsorted(b, tau, side="right") - 1, 0, len(self.segments) - 1))
        return self.segments[i].at((tau - b[i]) / (b[i + 1] - b[i]))

    @property
    def initial(self) -> Controls:
        return self.segments[0].start

    @property
    def final(self) -> Controls:
        return self.segments[-1].end

    def with_duration(self, T: float) -> "RampSchedule":
        return RampSchedule(T, self.segments)

    def reversed(self) -> "RampSchedule":
        segs = [Segment(s.end, s.start, s.weight, s.shape) for s in reversed(self.segments)]
        return RampSchedule(self.T, tuple(segs))

    def to_dict(self) -> dict:
        return {"T": self.T, "segments": [
            {"start": asdict(s.start), "end": asdict(s.end), "weight": s.weight, "shape": s.shape}
            for s in self.segments
        ]}


def preparation_schedule(T: float, eps0: float, split: float = 0.5, shape: str = "smoothstep") -> RampSchedule:
    """Drives 0 -> 1 at fixed pinning ``eps0``, then pinning ``eps0`` -> 0.

    ``split`` is the fraction of ``T`` spent on the drive ramp.
    """
    if not 0 < split < 1:
        raise ScheduleError("split must lie strictly between 0 and 1")
    a = Controls(eps0, 0.0, 0.0, 0.0)
    b = Controls(eps0, 1.0, 1.0, 0.0)
    c = Controls(0.0, 1.0, 1.0, 0.0)
    return RampSchedule(T, (Segment(a, b, split, shape), Segment(b, c, 1 - split, shape)))


def flux_schedule(T: float, shape: str = "smoothstep", start: float = 0.0, end: float = 1.0) -> RampSchedule:
    return RampSchedule(T, (Segment(Controls(flux=start), Controls(flux=end), 1.0, shape),))


# --- model contexts ------------------------------------------------------------


def quasihole_orientation(alpha) -> float:
    """Solenoid sign that pushes lowest-Landau-level orbits outward.

    A flux tube parallel to the background field shrinks the orbits around it
    (each orbit keeps its enclosed flux), so the depleting orientation is the
    antiparallel one.
    """
    return -1.0 if alpha > 0 else 1.0


def solenoid_pattern(lattice: LatticeSpec, plaquette: tuple[int, int], orientation: float = 1.0) -> PhasePattern:
    """Link phases of a solenoid of flux ``orientation`` (+-1) through ``plaquette``.

    The background field is zero here; counterclockwise circulation is
    positive, as for ``landau_phases`` with alpha > 0. A torus cannot hold a
    net fractional flux, so there an opposite solenoid is placed at the
    plaquette farthest away.
    """
    if orientation not in (1.0, -1.0):
        raise ScheduleError("solenoid orientation must be +1 or -1")
    p, q = plaquette
    if lattice.is_torus:
        if not (0 <= p < lattice.Lx and 0 <= q < lattice.Ly):
            raise ScheduleError(f"plaquette {plaquette} is not on the lattice")
    elif not (0 <= p < lattice.Lx - 1 and 0 <= q < lattice.Ly - 1):
        raise ScheduleError(f"plaquette {plaquette} is not on the lattice")
    sols = [Solenoid(p + 0.5, q + 0.5, orientation)]
    if lattice.is_torus:
        pa, qa = (p + lattice.Lx // 2) % lattice.Lx, (q + lattice.Ly // 2) % lattice.Ly
        sols.append(Solenoid(pa + 0.5, qa + 0.5, -orientation))
    pattern = general_gauge_phases(lattice, None, GaugeConfig(0, tuple(sols)))
    if not lattice.is_torus:
        return pattern
    # zero the row-0 / column-0 holonomies so a full flux quantum is a pure gauge
    links = lattice.links
    ph = pattern.link_phases().copy()
    hx = ph[(links.axis == 0) & (links.q == 0)].sum()
    hy = ph[(links.axis == 1) & (links.p == 0)].sum()
    ph[(links.axis == 0) & links.wrap] -= hx
    ph[(links.axis == 1) & links.wrap] -= hy
    conv = dict(pattern.conventions, holonomy="row 0 and column 0 holonomies set to zero")
    return PhasePattern.from_link_phases(lattice, ph, conv)


@dataclass(eq=False)
class HardcoreContext:
    """Effective spin model; hopping on x (y) links scales as ``rabi_x**2`` (``rabi_y**2``)."""

    basis: HardCoreBasis
    pattern: PhasePattern
    t: float = 1.0
    pin: PinningPotential = NO_PIN
    flux_pattern: PhasePattern | None = None

    def __post_init__(self):
        self._op = HardcoreOperator.for_basis(self.basis)
        self._shifts = self.pin.site_shifts(self.basis.lattice)
        self._pin_diag = -(self.basis.occupations @ self._shifts) if self.pin.entries else None
        self._base = self.pattern.link_phases()
        self._flux = self.flux_pattern.link_phases() if self.flux_pattern is not None else None
        self._axis = self.basis.lattice.links.axis

    @property
    def energy_scale(self) -> float:
        return self.t

    def with_solenoid(self, plaquette, orientation: float = 1.0) -> "HardcoreContext":
        return replace(self, flux_pattern=solenoid_pattern(self.basis.lattice, plaquette, orientation))

    def hamiltonian(self, c: Controls):
        phases = self._base if self._flux is None or c.flux == 0 else self._base + c.flux * self._flux
        if self._flux is None and c.flux != 0:
            raise ScheduleError("flux control requires a solenoid; use with_solenoid")
        t_link = self.t * np.where(self._axis == 0, c.rabi_x**2, c.rabi_y**2)
        diag = None if self._pin_diag is None else (c.eps * self.t) * self._pin_diag
        return self._op.assemble(self._op.values(phases, t_link, diag))


@dataclass(eq=False)
class CavityContext:
    basis: CavityBasis
    pattern: PhasePattern
    params: CavityParams
    pin: PinningPotential = NO_PIN
    flux_pattern: PhasePattern | None = None

    def __post_init__(self):
        self._op = CavityOperator.for_basis(self.basis)

    @property
    def energy_scale(self) -> float:
        return self.params.t

    def with_solenoid(self, plaquette, orientation: float = 1.0) -> "CavityContext":
        return replace(self, flux_pattern=solenoid_pattern(self.basis.lattice, plaquette, orientation))

    def hamiltonian(self, c: Controls):
        pattern = self.pattern
        if c.flux != 0:
            if self.flux_pattern is None:
                raise ScheduleError("flux control requires a solenoid; use with_solenoid")
            pattern = pattern + self.flux_pattern.scaled(c.flux)
        pin = PinningPotential(tuple((j, c.eps * self.params.t * e) for j, e in self.pin.entries))
        return self._op.assemble(self._op.values(pattern, self.params, pin, (c.rabi_x, c.rabi_y)))


# --- propagator ----------------------------------------------------------------


def krylov_expm(A, v, dt: float, m_max: int = 40, tol: float = 1e-12):
    """``exp(-i A dt) v`` for Hermitian ``A`` with a Lanczos basis of at most ``m_max`` vectors.

    Returns ``(w, err, m)``; ``err`` estimates the 2-norm error from the
    coupling of the Krylov space to the next Lanczos vector. Raises
    ``NumericalError`` if ``tol`` is not met, so the caller can shorten ``dt``.
    """
    n = v.shape[0]
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), 0.0, 0
    m_max = min(m_max, n)
    V = np.zeros((m_max + 1, n), dtype=complex)
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    V[0] = v / beta0
    for j in range(m_max):
        w = A @ V[j]
        alpha[j] = np.real(np.vdot(V[j], w))
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
        # full reorthogonalization keeps the small basis exactly unitary
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        T = np.diag(alpha[: j + 1]) + np.diag(beta[:j], 1) + np.diag(beta[:j], -1)
        evals, evecs = np.linalg.eigh(T)
        c = evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())
        err = beta0 * beta[j] * abs(c[-1])
        if err <= tol or beta[j] < 1e-14 or j + 1 == n:
            return beta0 * (V[: j + 1].T @ c), float(err), j + 1
        V[j + 1] = w / beta[j]
    raise NumericalError(f"Krylov step of length {dt} did not reach tolerance {tol} ({err:.2e})")


@dataclass(eq=False)
class PropagationResult:
    final: StateVector
    times: np.ndarray
    energies: np.ndarray
    norms: np.ndarray
    controls: list
    fidelities: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "times": [float(x) for x in self.times],
            "energies": [float(x) for x in self.energies],
            "norms": [float(x) for x in self.norms],
            "controls": [asdict(c) for c in self.controls],
            "fidelities": None if self.fidelities is None else [float(x) for x in self.fidelities],
            "basis": self.final.basis.descriptor(),
            "meta": self.meta,
        }

    def save(self, stem) -> None:
        """``<stem>.json`` time series and ``<stem>.state`` final vector."""
        stem = Path(stem)
        stem.with_suffix(".json").write_text(json.dumps(self.to_json(), indent=2))
        write_state(stem.with_suffix(".state"), self.final)

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - 1.0)))


def propagate(
    initial: StateVector,
    schedule: RampSchedule,
    context,
    dt_max: float = 0.01,
    *,
    n_samples: int = 101,
    fidelity: Callable[[StateVector, Controls], float] | None = None,
    krylov_tol: float = 1e-12,
    max_halvings: int = 4,
) -> PropagationResult:
    """Evolve ``initial`` under ``context.hamiltonian(schedule.at(tau))``.

    ``schedule.T`` and ``dt_max`` are in units of ``1/context.energy_scale``.
    On ``NormDrift`` the whole run is repeated with ``dt_max`` halved, at most
    ``max_halvings`` times. ``fidelity`` (optional) is evaluated at each sample.
    """
    if not initial.is_normalized(1e-10):
        raise ValueError("initial state must be normalized")
    if dt_max <= 0:
        raise ScheduleError("dt_max must be positive")
    if initial.basis.dim != context.basis.dim:
        raise ValueError("initial state and context have different bases")
    dt = dt_max
    for _ in range(max_halvings + 1):
        try:
            return _run(initial, schedule, context, dt, n_samples, fidelity, krylov_tol)
        except NormDrift:
            dt /= 2
    raise NormDrift(f"norm drift persists down to dt = {dt * 2}")


def _run(initial, schedule, context, dt_max, n_samples, fidelity, krylov_tol):
    scale = context.energy_scale
    T = schedule.T
    n_steps = max(1, math.ceil(T / dt_max - 1e-9)) if T > 0 else 0
    h = T / n_steps if n_steps else 0.0
    sample_steps = set(np.unique(np.linspace(0, n_steps, max(2, n_samples)).round().astype(int)).tolist())
    psi = initial.amplitudes.copy()
    times, energies, norms, controls, fids = [], [], [], [], []
    krylov_dims = []

    def record(step):
        tau = step / n_steps if n_steps else 1.0
        c = schedule.at(tau)
        H = context.hamiltonian(c)
        nrm = np.linalg.norm(psi)
        times.append(step * h)
        energies.append(float(np.real(np.vdot(psi, H @ psi))) / nrm**2 / scale)
        norms.append(nrm)
        controls.append(c)
        if fidelity is not None:
            fids.append(fidelity(StateVector(initial.basis, psi / nrm), c))
        if abs(nrm - 1.0) > NORM_TOL:
            raise NormDrift(f"norm drifted to {nrm!r} at t = {step * h}")

    record(0)
    for step in range(n_steps):
        c = schedule.at((step + 0.5) / n_steps)
        H = context.hamiltonian(c)
        sub, remaining = 1, h / scale
        while True:
            try:
                out = psi
                for _ in range(sub):
                    out, err, m = krylov_expm(H, out, remaining / sub, tol=krylov_tol)
                    krylov_dims.append(m)
                break
            except NumericalError:
                sub *= 2
                if sub > 1024:
                    raise
        psi = out
        if step + 1 in sample_steps:
            record(step + 1)
    if n_steps == 0 and 0 not in sample_steps:
        record(0)
    meta = {
        "dt": h,
        "steps": n_steps,
        "T": T,
        "energy_scale": scale,
        "max_krylov_dim": int(max(krylov_dims)) if krylov_dims else 0,
        "schedule": schedule.to_dict(),
    }
    return PropagationResult(
        StateVector(initial.basis, psi),
        np.array(times),
        np.array(energies),
        np.array(norms),
        controls,
        np.array(fids) if fidelity is not None else None,
        meta,
    )


def insert_flux(
    ground: StateVector,
    plaquette: tuple[int, int],
    schedule: RampSchedule,
    context,
    dt_max: float = 0.01,
    orientation: float = 1.0,
    **kwargs,
) -> PropagationResult:
    """Thread one flux quantum through ``plaquette`` along ``schedule``.

    The schedule's flux must run from 0 to 1; ``orientation`` (+-1) sets the
    solenoid's sign (see ``quasihole_orientation``). ``result.context`` is the
    context with the solenoid attached, for continuing or reversing the run.
    """
    if schedule.initial.flux != 0.0 or schedule.final.flux != 1.0:
        raise ScheduleError("flux insertion schedules must run from flux 0 to flux 1")
    ctx = context.with_solenoid(plaquette, orientation)
    res = propagate(ground, schedule, ctx, dt_max, **kwargs)
    res.meta["plaquette"] = list(plaquette)
    res.meta["orientation"] = orientation
    res.meta["solenoids"] = ctx.flux_pattern.conventions.get("solenoids")
    res.context = ctx
    return res


def sudden_flux_jump(state: StateVector) -> StateVector:
    """Zero-duration insertion: the state is unchanged while the Hamiltonian jumps."""
    return StateVector(state.basis, state.amplitudes.copy())
