import json
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from fqhcavity.dynamics import (
    CavityContext,
    Controls,
    HardcoreContext,
    RampSchedule,
    Segment,
    flux_schedule,
    insert_flux,
    krylov_expm,
    preparation_schedule,
    propagate,
    quasihole_orientation,
    solenoid_pattern,
    sudden_flux_jump,
)
from fqhcavity.errors import ScheduleError
from fqhcavity.experiments import DEFAULT_CAVITY, DEFAULT_PINNED, System, ground_manifold
from fqhcavity.hamiltonians import PinningPotential, build_cavity_model, build_hardcore_fqh
from fqhcavity.hilbert import CavityBasis, HardCoreBasis, StateVector
from fqhcavity.lattice import LatticeSpec, plaquette_circulation
from fqhcavity.observables import manifold_fidelity

controls = st.builds(Controls, st.floats(0, 5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))


@settings(max_examples=40, deadline=None)
@given(points=st.lists(controls, min_size=2, max_size=5), weights=st.data(), tau=st.floats(0, 1))
def test_schedule_continuity(points, weights, tau):
    w = weights.draw(st.lists(st.floats(0.1, 3), min_size=len(points) - 1, max_size=len(points) - 1))
    segs = tuple(Segment(a, b, wi) for a, b, wi in zip(points, points[1:], w))
    S = RampSchedule(10.0, segs)
    assert np.allclose(S.at(0.0).as_array(), points[0].as_array())
    assert np.allclose(S.at(1.0).as_array(), points[-1].as_array())
    # no jumps: a tiny step in tau moves the controls by a tiny amount
    h = 1e-7
    a, b = S.at(max(tau - h, 0)).as_array(), S.at(min(tau + h, 1)).as_array()
    spread = max(1.0, max(np.abs(p.as_array()).max() for p in points))
    assert np.abs(a - b).max() < 1e-4 * spread
    R = S.reversed()
    assert np.allclose(R.at(1 - tau).as_array(), S.at(tau).as_array(), atol=1e-9)


def test_schedule_rejects_jumps_and_bad_input():
    with pytest.raises(ScheduleError):
        RampSchedule(1.0, (Segment(Controls(0), Controls(1)), Segment(Controls(2), Controls(3))))
    with pytest.raises(ScheduleError):
        RampSchedule(-1.0, (Segment(Controls(0), Controls(1)),))
    with pytest.raises(ScheduleError):
        RampSchedule(1.0, (Segment(Controls(0), Controls(1), shape="cubic"),))
    s = preparation_schedule(10, 3.0)
    assert s.initial == Controls(3.0, 0.0, 0.0, 0.0) and s.final == Controls(0.0, 1.0, 1.0, 0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), dt=st.floats(0.01, 3.0))
def test_krylov_matches_dense_exponential(seed, dt):
    rng = np.random.default_rng(seed)
    n = 80
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = 0.5 * (M + M.conj().T) / math.sqrt(n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v /= np.linalg.norm(v)
    w, err, m = krylov_expm(sp.csr_matrix(A), v, dt)
    assert np.linalg.norm(w - sla.expm(-1j * dt * A) @ v) < 1e-10


def test_stationary_state(hc_basis, torus_pattern, hc_ground):
    spec, _ = hc_ground
    ctx = HardcoreContext(hc_basis, torus_pattern)
    c = Controls(0.0, 1.0, 1.0, 0.0)
    T = 7.3
    res = propagate(spec.state(2), RampSchedule(T, (Segment(c, c),)), ctx, 0.05)
    expected = np.exp(-1j * spec.eigenvalues[2] * T) * spec.vectors[:, 2]
    assert abs(np.vdot(expected, res.final.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-9)
    assert np.abs(res.final.amplitudes - expected).max() < 1e-8
    assert res.max_norm_drift < 1e-10


def test_sudden_quench_is_static_overlap(hc_basis, torus_pattern, torus_lattice, hc_ground):
    _, manifold = hc_ground
    sites = [torus_lattice.site(p, q) for p, q in DEFAULT_PINNED]
    ctx = HardcoreContext(hc_basis, torus_pattern, 1.0, PinningPotential(tuple((j, 1.0) for j in sites)))
    psi0 = hc_basis.product_state(sites)
    res = propagate(psi0, preparation_schedule(0.0, 10.0), ctx)
    assert manifold_fidelity(res.final, manifold) == pytest.approx(manifold_fidelity(psi0, manifold), abs=1e-14)


def test_drive_scaling_matches_builder(hc_basis, torus_pattern, torus_lattice):
    # at controls (eps, rabi, rabi) the context equals the static model with t * rabi^2 and pinning eps * t
    pin = PinningPotential.at(torus_lattice, DEFAULT_PINNED, 1.0)
    ctx = HardcoreContext(hc_basis, torus_pattern, 0.5, pin)
    H = ctx.hamiltonian(Controls(3.0, 0.6, 0.6, 0.0))
    ref = build_hardcore_fqh(hc_basis, torus_pattern, 0.5 * 0.36, PinningPotential.at(torus_lattice, DEFAULT_PINNED, 1.5))
    assert abs(H - ref.matrix).max() < 1e-15


def test_cavity_context_matches_builder():
    ctx = CavityContext(CavityBasis(LatticeSpec(4, 4), 2), System(LatticeSpec(4, 4), Fraction(1, 4), 2).pattern, DEFAULT_CAVITY)
    ref = build_cavity_model(ctx.basis, ctx.pattern, DEFAULT_CAVITY)
    assert abs(ctx.hamiltonian(Controls()) - ref.matrix).max() == 0.0


def test_quasihole_orientation_sign():
    assert quasihole_orientation(Fraction(1, 4)) == -1.0
    assert quasihole_orientation(Fraction(-1, 4)) == 1.0


@pytest.mark.parametrize("boundary", ["torus", "open"])
def test_solenoid_pattern_flux(boundary):
    L = LatticeSpec(6, 6, boundary)
    P = solenoid_pattern(L, (2, 2), 1.0)
    circ = {pq: plaquette_circulation(P, *pq) for pq in L.plaquettes()}
    assert circ[(2, 2)] == pytest.approx(2 * math.pi, abs=1e-10)
    if L.is_torus:
        assert circ[(5, 5)] == pytest.approx(-2 * math.pi, abs=1e-10)
    others = [v for pq, v in circ.items() if pq not in ((2, 2), (5, 5))]
    assert np.abs(others).max() < 1e-10


@pytest.mark.parametrize("boundary", ["torus", "open"])
def test_unit_flux_jump_is_isospectral(boundary):
    sys_ = System(LatticeSpec(4, 4, boundary), Fraction(1, 4), 2)
    B = HardCoreBasis(sys_.lattice, 2)
    ctx = HardcoreContext(B, sys_.pattern).with_solenoid((1, 1), -1.0)
    H0 = ctx.hamiltonian(Controls(flux=0.0)).toarray()
    H1 = ctx.hamiltonian(Controls(flux=1.0)).toarray()
    e0, v0 = np.linalg.eigh(H0)
    assert np.abs(np.linalg.eigvalsh(H1) - e0).max() < 1e-10
    # the unevolved ground state is no longer an eigenstate of the final Hamiltonian
    psi = sudden_flux_jump(StateVector(B, v0[:, 0]))
    assert np.real(np.vdot(psi.amplitudes, H1 @ psi.amplitudes)) > e0[0] + 1e-3


def test_insert_flux_requires_unit_schedule(hc_basis, torus_pattern, hc_ground):
    _, manifold = hc_ground
    with pytest.raises(ScheduleError):
        insert_flux(manifold[0], (1, 1), flux_schedule(1.0, end=0.5), HardcoreContext(hc_basis, torus_pattern))


def test_short_preparation_improves_on_static_overlap(hc_basis, torus_pattern, torus_lattice, hc_ground):
    _, manifold = hc_ground
    sites = [torus_lattice.site(p, q) for p, q in DEFAULT_PINNED]
    ctx = HardcoreContext(hc_basis, torus_pattern, 1.0, PinningPotential(tuple((j, 1.0) for j in sites)))
    psi0 = hc_basis.product_state(sites)
    res = propagate(psi0, preparation_schedule(50.0, 1.0), ctx, 0.02)
    f = manifold_fidelity(res.final, manifold)
    assert f > 0.95 > manifold_fidelity(psi0, manifold)
    assert res.max_norm_drift < 1e-8
    payload = json.dumps(res.to_json())
    assert '"T": 50.0' in payload


@pytest.mark.xfail(strict=True, reason="N=2 on 4x4 is too small to hold a localized quasihole; see the 6x6 acceptance run")
def test_quasihole_on_four_by_four_torus():
    from fqhcavity.experiments import run_flux_insertion

    res = run_flux_insertion([100], System(LatticeSpec(4, 4), Fraction(1, 4), 2), (1, 1), "quasihole")
    row = res["rows"][0]
    assert abs(row["depletion_region"] - 0.5) <= 0.05 and row["round_trip_fidelity"] >= 0.99


def test_energy_excursion_shrinks_with_ramp_time(hc_basis, torus_pattern, torus_lattice, hc_ground):
    spec, _ = hc_ground
    sites = [torus_lattice.site(p, q) for p, q in DEFAULT_PINNED]
    ctx = HardcoreContext(hc_basis, torus_pattern, 1.0, PinningPotential(tuple((j, 1.0) for j in sites)))
    psi0 = hc_basis.product_state(sites)
    excess = []
    for T in (10.0, 30.0, 90.0):
        res = propagate(psi0, preparation_schedule(T, 1.0), ctx, 0.02)
        excess.append(res.energies[-1] - spec.eigenvalues[0])
    assert excess[0] > excess[1] > excess[2] > -1e-9


def test_propagation_result_files(tmp_path, hc_basis, torus_pattern, hc_ground):
    spec, _ = hc_ground
    c = Controls()
    res = propagate(spec.state(0), RampSchedule(1.0, (Segment(c, c),)), HardcoreContext(hc_basis, torus_pattern))
    res.save(tmp_path / "run")
    from fqhcavity.hilbert import read_state

    back = read_state(tmp_path / "run.state", hc_basis)
    assert np.array_equal(back.amplitudes, res.final.amplitudes)
    assert json.loads((tmp_path / "run.json").read_text())["meta"]["steps"] == 100
