import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from fqhcavity.experiments import DEFAULT_PINNED, DEFAULT_SYSTEM, ground_manifold
from fqhcavity.hamiltonians import CavityParams, build_cavity_model
from fqhcavity.hilbert import PHOTON_X, CavityBasis, HardCoreBasis, StateVector
from fqhcavity.lattice import LatticeSpec
from fqhcavity.laughlin import LaughlinParams, laughlin_torus_state, laughlin_torus_states
from fqhcavity.observables import (
    density,
    fidelity_report,
    gap_curve,
    manifold_density,
    manifold_fidelity,
    pair_correlation,
    photon_population,
    write_pair_csv,
    write_site_csv,
)


def test_product_state_density(hc_basis, torus_lattice):
    L = torus_lattice
    n = density(hc_basis.product_state([L.site(0, 0), L.site(2, 2)]))
    expected = np.zeros(16)
    expected[[L.site(0, 0), L.site(2, 2)]] = 1
    assert np.array_equal(n, expected)


def test_manifold_density_uniform(hc_ground):
    _, manifold = hc_ground
    assert np.abs(manifold_density(manifold) - 1 / 8).max() < 1e-8


def test_equal_superposition_uniform(hc_basis):
    v = StateVector(hc_basis, np.ones(hc_basis.dim) / math.sqrt(hc_basis.dim))
    assert np.allclose(density(v), 1 / 8, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), boundary=st.sampled_from(["torus", "open"]), N=st.integers(1, 4))
def test_pair_correlation_counting(seed, boundary, N):
    L = LatticeSpec(3, 4, boundary)
    B = HardCoreBasis(L, N)
    rng = np.random.default_rng(seed)
    v = StateVector(B, rng.normal(size=B.dim) + 1j * rng.normal(size=B.dim)).normalized()
    g = pair_correlation(v)
    assert g(0, 0) == 0.0
    if L.is_torus:
        assert abs(g.table.sum() * L.n_sites - N * (N - 1)) < 1e-9
    # brute-force oracle from the occupation table
    occ = B.occupations.astype(float)
    w = np.abs(v.amplitudes) ** 2
    pairs = 0.0
    for j in range(L.n_sites):
        p, q = L.coords(j)
        if L.is_torus or (p + 1 < L.Lx and q + 2 < L.Ly):
            k = L.site(p + 1, q + 2)
            pairs += w @ (occ[:, j] * occ[:, k])
    assert abs(g(1, 2) * L.n_sites - pairs) < 1e-12


def test_laughlin_correlation_hole(hc_basis, torus_lattice):
    v = laughlin_torus_state(LaughlinParams(2, torus_lattice, Fraction(1, 4), 2), hc_basis)
    g = pair_correlation(v)
    assert g(2, 2) > g(1, 0)


def test_manifold_fidelity_limits(hc_ground):
    _, manifold = hc_ground
    assert manifold_fidelity(manifold[0], manifold) == pytest.approx(1.0, abs=1e-12)
    mix = StateVector(manifold[0].basis, (manifold[0].amplitudes + 1j * manifold[1].amplitudes) / math.sqrt(2))
    assert manifold_fidelity(mix, manifold) == pytest.approx(1.0, abs=1e-12)
    assert manifold_fidelity(manifold[1], manifold[:1]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        manifold_fidelity(manifold[0], [manifold[0], manifold[0]])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fidelity_invariant_under_remixing(seed, hc_ground, hc_basis, torus_lattice):
    _, manifold = hc_ground
    trial = laughlin_torus_states(LaughlinParams(2, torus_lattice, Fraction(1, 4), 2), hc_basis)
    U = unitary_group.rvs(2, random_state=seed)
    M = np.stack([v.amplitudes for v in manifold], axis=1) @ U
    mixed = [StateVector(hc_basis, M[:, i]) for i in range(2)]
    a = fidelity_report(trial, manifold)
    b = fidelity_report(trial, mixed)
    assert abs(a.projector - b.projector) < 1e-12
    assert abs(a.raw_projector - b.raw_projector) < 1e-12


def test_projector_fidelity_equals_trace_formula(hc_ground, hc_basis, torus_lattice):
    _, manifold = hc_ground
    trial = laughlin_torus_states(LaughlinParams(2, torus_lattice, Fraction(1, 4), 2), hc_basis)
    T, _ = np.linalg.qr(np.stack([v.amplitudes for v in trial], axis=1))
    G = np.stack([v.amplitudes for v in manifold], axis=1)
    ref = np.trace(T @ T.conj().T @ G @ G.conj().T).real / 2
    rep = fidelity_report(trial, manifold)
    # mean per-sector overlap equals tr(P_T P_G)/2 when the sectors are orthogonal enough
    assert abs(rep.raw_projector - ref) < 1e-12
    assert rep.projector == pytest.approx(0.989, abs=0.01)


def test_photon_population_basis_states():
    L = LatticeSpec(2, 2)
    B = CavityBasis(L, 1)
    free = np.flatnonzero(B.photon_free)[0]
    v = StateVector(B, np.eye(B.dim)[free])
    assert photon_population(v) == pytest.approx({"atomic": 1, "photonX": 0, "photonY": 0, "photon_free": 1})
    xi = B.index(B.encode([PHOTON_X, 0, 0, 0]))
    v = StateVector(B, np.eye(B.dim)[xi])
    assert photon_population(v) == pytest.approx({"atomic": 0, "photonX": 1, "photonY": 0, "photon_free": 0})


def test_photon_fraction_drops_with_detuning_hierarchy():
    B = CavityBasis(LatticeSpec(4, 4), 2)
    fractions = []
    for r in (10, 20):
        params = CavityParams.from_ratios(10, r, t=1e-4)
        assert params.t == pytest.approx(1e-4)
        H = build_cavity_model(B, DEFAULT_SYSTEM.pattern, params)
        _, manifold = ground_manifold(H, 4, cluster_tol=1e-8 * params.t)
        pops = photon_population(manifold[0])
        fractions.append(pops["photonX"] + pops["photonY"])
    assert fractions[0] < 0.01
    assert fractions[1] < fractions[0]


def test_gap_curve_structure(hc_basis, torus_pattern):
    eps = np.linspace(0, 1, 11).tolist() + [50.0]
    curve = gap_curve(hc_basis, torus_pattern, DEFAULT_PINNED, eps, k=4)
    assert curve.gaps[0, 0] < 1e-8
    assert curve.gaps[0, 1] > 0.1
    assert curve.product_overlap[-1] >= 0.99
    # continuity on the dense part of the grid: no level jumps larger than 10 * d_eps
    levels = curve.ground[:11, None] + np.concatenate([np.zeros((11, 1)), curve.gaps[:11]], axis=1)
    assert np.abs(np.diff(levels, axis=0)).max() < 10 * 0.1


def test_gap_curve_matches_dense(hc_basis, torus_pattern, torus_lattice):
    from fqhcavity.hamiltonians import PinningPotential, build_hardcore_fqh

    eps = [0.0, 0.3, 2.0]
    curve = gap_curve(hc_basis, torus_pattern, DEFAULT_PINNED, eps, k=4)
    for e, g0, gaps in zip(eps, curve.ground, curve.gaps):
        pin = PinningPotential.at(torus_lattice, DEFAULT_PINNED, e)
        ev = np.linalg.eigvalsh(build_hardcore_fqh(hc_basis, torus_pattern, 1.0, pin).to_dense())
        assert abs(ev[0] - g0) < 1e-10
        assert np.abs(ev[1:4] - ev[0] - gaps).max() < 1e-10


def test_csv_writers(tmp_path, hc_ground, torus_lattice):
    _, manifold = hc_ground
    write_site_csv(tmp_path / "n.csv", torus_lattice, {"n": density(manifold[0])})
    rows = list(csv.reader(open(tmp_path / "n.csv")))
    assert rows[0] == ["site", "p", "q", "n"] and len(rows) == 17
    write_pair_csv(tmp_path / "g.csv", pair_correlation(manifold[0]))
    assert len(list(csv.reader(open(tmp_path / "g.csv")))) == 17
