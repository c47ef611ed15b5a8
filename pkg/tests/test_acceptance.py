"""Acceptance gate: ten end-to-end criteria with stated tolerances.

Each test prints one line
    ACCEPTANCE <n> <name>: PASS|FAIL  <measured values>  (tol ..., budget ...s)
and then asserts.  Criteria are numbered; runtime budgets are asserted
against wall-clock time of the criterion body.
"""

import time

import numpy as np
import pytest

from blochlab.bloch import (PeriodicPotential, PlaneWaveBasis, make_kgrid,
                            solve_bands, zak_forward, zak_inverse, zak_at_k)
from blochlab.effective import BandModel, EffectiveModel
from blochlab.fields import custom_fourier, gaussian_window_fields
from blochlab.fitting import fit_order
from blochlab.flow import (flow_map, hall_current_from_spectrum,
                           hamiltonian_value, kinetic_from_canonical_flow,
                           equation_residual, liouville_divergence,
                           vector_field)
from blochlab.geometry import (TwoLevelModel, berry_curvature,
                               berry_curvature_plaquette, chern_number,
                               rammal_wilkinson_at, rammal_wilkinson_fd)
from blochlab.lattice import Lattice, square_lattice
from blochlab.series import CallableField, TrigPoly, zero_field
from blochlab.weyl import WeylGrid, heisenberg_gap, zak_consistency_check
from blochlab import quantum as Q


def _report(num, name, ok, detail, tol, budget, elapsed):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} {name}: {status}  {detail}  "
          f"(tol {tol}, {elapsed:.1f}s of {budget}s budget)")


# ---------------------------------------------------------------------------
# 1. free-particle exactness
# ---------------------------------------------------------------------------

def test_criterion_1_free_particle():
    t0 = time.monotonic()
    lat = Lattice(np.array([[1.0]]))
    basis = PlaneWaveBasis(lat, 40.0)
    spec = solve_bands(PeriodicPotential(lat, {}), basis, make_kgrid(lat, [8]))
    worst = 0.0
    for idx in np.ndindex(*spec.grid_shape):
        k = spec.kpoints[idx]
        exact = np.sort(0.5 * np.sum((k + basis.gcart) ** 2, axis=1))
        worst = max(worst, float(np.max(np.abs(spec.energies[idx] - exact))))
    w0, _ = spec.solve_at(np.array([0.0]))
    gamma_err = max(abs(w0[0] - 0.0), abs(w0[1] - 2 * np.pi ** 2),
                    abs(w0[2] - 2 * np.pi ** 2))
    el = time.monotonic() - t0
    ok = worst < 1e-12 and gamma_err < 1e-10 and el < 1.0
    _report(1, "free-particle", ok,
            f"grid err {worst:.2e}, k=0 ladder err {gamma_err:.2e}",
            "1e-12 / 1e-10", 1, el)
    assert worst < 1e-12
    assert gamma_err < 1e-10
    assert el < 1.0


# ---------------------------------------------------------------------------
# 2. Zak unitarity and boundary phase
# ---------------------------------------------------------------------------

def test_criterion_2_zak_unitarity():
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    psi = rng.normal(size=160) + 1j * rng.normal(size=160)
    z = zak_forward(psi, 16)
    unit = abs(np.linalg.norm(z.amplitudes) - np.linalg.norm(psi))
    invert = float(np.max(np.abs(zak_inverse(z) - psi)))
    # boundary phase on the grid: k -> k + 2 pi multiplies by e^{-i y 2 pi}
    gstar = 2 * np.pi
    bnd = 0.0
    for j in (0, 5):
        shifted = zak_at_k(psi, 16, z.kpoints[j] + gstar)
        expect = z.amplitudes[j] * np.exp(-1j * z.ypoints * gstar)
        bnd = max(bnd, float(np.max(np.abs(shifted - expect))))
    el = time.monotonic() - t0
    worst = max(unit, invert)
    ok = worst < 1e-10 and bnd < 1e-10 and el < 1.0
    _report(2, "zak-unitarity", ok,
            f"unitarity+roundtrip {worst:.2e}, boundary phase {bnd:.2e}",
            "1e-10", 1, el)
    assert worst < 1e-10 and bnd < 1e-10
    assert el < 1.0


# ---------------------------------------------------------------------------
# 3. geometry oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_3_geometry_oracles():
    t0 = time.monotonic()
    lat = square_lattice(1.0, 2)
    pot = PeriodicPotential(lat, {
        (1, 0): 3.0 + 1.2j, (-1, 0): 3.0 - 1.2j,
        (0, 1): 2.7 - 0.9j, (0, -1): 2.7 + 0.9j,
        (1, 1): 1.5 + 0.8j, (-1, -1): 1.5 - 0.8j})
    basis = PlaneWaveBasis(lat, 30.0)
    shapes = [24, 32, 48, 64]
    errs = []
    for m in shapes:
        spec = solve_bands(pot, basis, make_kgrid(lat, [m, m]), nbands=6)
        plq, _ = berry_curvature_plaquette(spec, 0)
        sos = berry_curvature(spec, 0)[..., 0, 1]
        avg = 0.25 * (sos + np.roll(sos, -1, 0) + np.roll(sos, -1, 1)
                      + np.roll(np.roll(sos, -1, 0), -1, 1))
        errs.append(np.linalg.norm(plq - avg) / np.linalg.norm(avg))
    order, _, _ = fit_order([1.0 / m for m in shapes], errs)

    pot_trs = PeriodicPotential(lat, {(1, 0): 0.4, (-1, 0): 0.4,
                                      (0, 1): 0.3, (0, -1): 0.3})
    spec_trs = solve_bands(pot_trs, PlaneWaveBasis(lat, 16.0),
                           make_kgrid(lat, [10, 10]), nbands=4)
    trs_chern = abs(chern_number(spec_trs, 0))

    two = TwoLevelModel(lat, m=-1.0).solve_grid([32, 32])
    _, chern1 = berry_curvature_plaquette(two, 0)
    el = time.monotonic() - t0
    ok = (1.7 <= order <= 2.5 and trs_chern < 1e-6
          and abs(chern1 - 1.0) < 1e-6 and el < 60)
    _report(3, "geometry-oracles", ok,
            f"plaquette order {order:.3f}, TRS chern {trs_chern:.1e}, "
            f"two-level chern err {abs(chern1 - 1.0):.1e}",
            "order in [1.7,2.5]; 1e-6", 60, el)
    assert 1.7 <= order <= 2.5
    assert trs_chern < 1e-6
    assert abs(chern1 - 1.0) < 1e-6
    assert el < 60


# ---------------------------------------------------------------------------
# 4. magnetic-moment cross-check (sum-over-states vs gauge-fixed FD)
# ---------------------------------------------------------------------------

def test_criterion_4_moment_cross_check():
    t0 = time.monotonic()
    lat = square_lattice(1.0, 2)
    pot = PeriodicPotential(lat, {
        (1, 0): 3.0 + 1.2j, (-1, 0): 3.0 - 1.2j,
        (0, 1): 2.7 - 0.9j, (0, -1): 2.7 + 0.9j,
        (1, 1): 1.5 + 0.8j, (-1, -1): 1.5 - 0.8j})
    spec = solve_bands(pot, PlaneWaveBasis(lat, 30.0),
                       make_kgrid(lat, [8, 8]), nbands=6)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        k = rng.uniform(-np.pi, np.pi, size=2)
        M_sos = rammal_wilkinson_at(spec, 0, k)
        M_fd = rammal_wilkinson_fd(spec, 0, k)
        rel = np.max(np.abs(M_sos - M_fd)) / max(np.max(np.abs(M_sos)), 1e-30)
        worst = max(worst, float(rel))
    el = time.monotonic() - t0
    ok = worst < 1e-3 and el < 60
    _report(4, "moment-cross-check", ok, f"max rel err {worst:.2e}",
            "1e-3", 60, el)
    assert worst < 1e-3
    assert el < 60


# ---------------------------------------------------------------------------
# synthetic 2D effective model shared by criteria 5 and 6
# ---------------------------------------------------------------------------

def _synthetic_model(eps):
    lat = square_lattice(1.0, 2)
    energy = TrigPoly.from_modes({(1, 0): 0.3, (0, 1): 0.25 * np.exp(0.2j),
                                  (1, 1): 0.1 * np.exp(0.5j)}, np.eye(2))
    A0 = TrigPoly.from_modes({(1, 0): 0.12 * np.exp(0.3j), (0, 1): 0.08},
                             np.eye(2))
    A1 = TrigPoly.from_modes({(0, 1): 0.1 * np.exp(-0.4j), (1, 1): 0.06},
                             np.eye(2))

    def omega01(k):
        k = np.asarray(k, float)
        return A1.grad(k)[..., 0] - A0.grad(k)[..., 1]

    z = zero_field(2)
    M01 = TrigPoly.from_modes({(1, 0): 0.05 * np.exp(0.1j)}, np.eye(2))
    M10 = TrigPoly.from_modes({(1, 0): -0.05 * np.exp(0.1j)}, np.eye(2))
    band = BandModel(lattice=lat, energy=energy, connection=(A0, A1),
                     curvature=(z, CallableField(omega01),
                                CallableField(lambda k: -omega01(k)), z),
                     moment=(z, M01, M10, z))
    fields = custom_fourier(2,
                            phi_modes=[((1.0, 0.0), 0.2),
                                       ((0.0, 1.0), 0.15 * np.exp(0.4j))],
                            A_modes=[(0, (0.0, 1.0), 0.1 * np.exp(0.3j)),
                                     (1, (1.0, 0.0), 0.12)])
    return EffectiveModel(band=band, fields=fields, eps=eps)


def test_criterion_5_flow_integrity():
    t0 = time.monotonic()
    model = _synthetic_model(0.05)
    z0 = np.array([0.4, -0.3, 0.7, 0.2])
    ref = flow_map(model, "corrected", z0, 2.0, 1e-4)
    hs = [0.05, 0.025, 0.0125]
    errs = [np.max(np.abs(flow_map(model, "corrected", z0, 2.0, h) - ref))
            for h in hs]
    order, _, _ = fit_order(hs, errs)
    zT = flow_map(model, "corrected", z0, 10.0, 1e-3)
    drift = abs(hamiltonian_value(model, "corrected", zT)
                - hamiltonian_value(model, "corrected", z0))
    rng = np.random.default_rng(5)
    zr = rng.uniform(-1, 1, size=(20, 4))
    resid = equation_residual(model, zr)
    div = float(np.max(np.abs(liouville_divergence(model, "corrected", zr))))
    el = time.monotonic() - t0
    ok = order >= 3.8 and drift < 1e-8 and resid < 1e-10 and div < 1e-6 \
        and el < 60
    _report(5, "flow-integrity", ok,
            f"RK4 order {order:.3f}, H drift {drift:.1e}, residual "
            f"{resid:.1e}, weighted divergence {div:.1e}",
            ">=3.8 / 1e-8 / 1e-10 / 1e-6", 60, el)
    assert order >= 3.8
    assert drift < 1e-8
    assert resid < 1e-10
    assert div < 1e-6
    assert el < 60


def test_criterion_6_chart_consistency():
    t0 = time.monotonic()
    eps_list = [1 / 8, 1 / 16, 1 / 32]
    gaps = []
    z_can = np.array([0.4, -0.3, 0.7, 0.2])
    for eps in eps_list:
        model = _synthetic_model(eps)
        zt_can = flow_map(model, "canonical", z_can, 3.0, 0.002)
        lifted = kinetic_from_canonical_flow(model, zt_can)
        z0_kin = kinetic_from_canonical_flow(model, z_can)
        zt_kin = flow_map(model, "corrected", z0_kin, 3.0, 0.002)
        gaps.append(float(np.max(np.abs(lifted - zt_kin))))
    order, _, _ = fit_order(eps_list, gaps)
    el = time.monotonic() - t0
    ok = order >= 1.7 and el < 60
    _report(6, "chart-consistency", ok,
            f"endpoint gaps {[f'{g:.2e}' for g in gaps]}, order {order:.3f}",
            ">=1.7", 60, el)
    assert order >= 1.7
    assert el < 60


# ---------------------------------------------------------------------------
# 7. operator-level transport comparison (interior operator norm)
# ---------------------------------------------------------------------------

def test_criterion_7_operator_transport():
    t0 = time.monotonic()
    lat = Lattice(np.array([[1.0]]))
    pot = PeriodicPotential(lat, {(1,): 1.8 + 0.6j, (-1,): 1.8 - 0.6j,
                                  (2,): 0.9, (-2,): 0.9})
    spec = solve_bands(pot, PlaneWaveBasis(lat, 40.0),
                       make_kgrid(lat, [32]), nbands=3)
    band = BandModel.from_spectrum(spec, 0)
    # weak windowed fields: strong enough that the leading (Peierls-only)
    # generator shows its O(eps) defect, weak enough that the corrected
    # generator's field-independent quadratic error is asymptotic at eps=1/8
    fields = gaussian_window_fields(1, phi_amp=0.05, phi_width=2.0,
                                    A_amp=[0.0375], A_width=3.0)

    def a_fn(k, r):
        return np.cos(np.asarray(k)) * np.exp(-(np.asarray(r) / 2.0) ** 2)

    eps_list = [1 / 8, 1 / 16, 1 / 32]
    times = [0.5, 1.0, 1.5, 2.0]
    gaps = {"corrected": [], "leading": []}
    for eps in eps_list:
        grid = WeylGrid(int(round(16 / eps)), 1.0, eps)
        model = EffectiveModel(band, fields, eps=eps)
        caches = {"corrected": {}, "leading": {}}
        per_t = {"corrected": [], "leading": []}
        for t in times:
            for gen in ("corrected", "leading"):
                per_t[gen].append(heisenberg_gap(
                    model, a_fn, t, grid, gen, n_k=64, n_r=128,
                    steps_per_unit=100, mask_frac=0.25, _cache=caches[gen]))
        for gen in ("corrected", "leading"):
            gaps[gen].append(max(per_t[gen]))
    order_c, _, _ = fit_order(eps_list, gaps["corrected"])
    order_l, _, _ = fit_order(eps_list, gaps["leading"])
    el = time.monotonic() - t0
    ok = order_c >= 1.7 and 0.8 <= order_l <= 1.3 and el < 600
    _report(7, "operator-transport", ok,
            f"corrected gaps {[f'{g:.2e}' for g in gaps['corrected']]} "
            f"order {order_c:.3f}; leading order {order_l:.3f}",
            "corrected >=1.7, leading in [0.8,1.3]", 600, el)
    assert order_c >= 1.7, (gaps, order_c)
    assert 0.8 <= order_l <= 1.3, (gaps, order_l)
    assert el < 600


# ---------------------------------------------------------------------------
# 8. full-Schrödinger expectation transport (1D, A = 0)
# ---------------------------------------------------------------------------

def test_criterion_8_schrodinger_transport():
    t0 = time.monotonic()
    lat = Lattice(np.array([[1.0]]))
    # deep potential: large band gaps give fast Fourier decay of the band
    # data, so the 64-mode interpolants below are machine-precision and the
    # packet stays adiabatic
    pot = PeriodicPotential(lat, {(1,): 1.8 + 0.6j, (-1,): 1.8 - 0.6j,
                                  (2,): 0.9, (-2,): 0.9})
    basis = PlaneWaveBasis(lat, 45.0)
    # band interpolants from a fixed moderate grid keep the classical-flow
    # cost independent of eps
    band = BandModel.from_spectrum(
        solve_bands(pot, basis, make_kgrid(lat, [64]), nbands=4), 0)
    L = 8.0
    fields = custom_fourier(1, phi_modes=[((2 * np.pi / L,),
                                           0.3 * np.exp(0.7j))])

    def a_fn(k, r):
        # position-only slow observable: interband matrix elements are O(eps),
        # so packet-preparation noise stays below the transport signal; sin
        # has maximal gradient at the packet center r = L/2
        return np.sin(2 * np.pi * np.asarray(r) / L) + 0.0 * np.asarray(k)

    eps_list = [1 / 16, 1 / 32, 1 / 64]
    gc, gl = [], []
    for eps in eps_list:
        n_cells = int(round(L / eps))
        spec = solve_bands(pot, basis, make_kgrid(lat, [n_cells]), nbands=4)
        grid = Q.MicroGrid(n_cells=n_cells, n_x=16)
        model = EffectiveModel(band, fields, eps=eps)
        out = Q.egorov_quantum_gap(pot, spec, model, grid, a_fn, t=1.0,
                                   k0=0.3, sigma_r=0.8, dtau=0.02,
                                   n_k=128, n_r=256, steps_per_unit=100)
        gc.append(out["gap_corrected"])
        gl.append(out["gap_leading"])
    order_c, _, _ = fit_order(eps_list, gc)
    ratios = [c / l for c, l in zip(gc, gl)]
    el = time.monotonic() - t0
    smaller = all(c < l for c, l in zip(gc, gl))
    decreasing = all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))
    ok = order_c >= 1.5 and smaller and decreasing and el < 1200
    _report(8, "schrodinger-transport", ok,
            f"corrected {[f'{g:.2e}' for g in gc]} order {order_c:.3f}; "
            f"leading {[f'{g:.2e}' for g in gl]}; ratios "
            f"{[f'{r:.3f}' for r in ratios]}",
            "order >=1.5, corrected < leading, ratio decreasing", 1200, el)
    assert order_c >= 1.5, (gc, order_c)
    assert smaller, (gc, gl)
    assert decreasing, ratios
    assert el < 1200


# ---------------------------------------------------------------------------
# 9. Hall current of a filled band
# ---------------------------------------------------------------------------

def test_criterion_9_hall_current():
    t0 = time.monotonic()
    lat = square_lattice(1.0, 2)
    two = TwoLevelModel(lat, m=-1.0).solve_grid([32, 32])
    e_field = np.array([0.3, -0.2])
    res = hall_current_from_spectrum(two, 0, e_field)
    target = -np.array([0.2, 0.3])   # -chern * perp(E) with chern = 1
    rel = np.max(np.abs(res["current"] - target)) / np.max(np.abs(target))

    pot_trs = PeriodicPotential(lat, {(1, 0): 0.4, (-1, 0): 0.4,
                                      (0, 1): 0.3, (0, -1): 0.3})
    spec_trs = solve_bands(pot_trs, PlaneWaveBasis(lat, 16.0),
                           make_kgrid(lat, [10, 10]), nbands=4)
    res0 = hall_current_from_spectrum(spec_trs, 0, e_field)
    zero = float(np.max(np.abs(res0["current"])))
    el = time.monotonic() - t0
    ok = rel < 0.01 and zero < 1e-6 and el < 60
    _report(9, "hall-current", ok,
            f"chern-1 rel err {rel:.2e}, TRS current {zero:.1e}",
            "1% / 1e-6", 60, el)
    assert rel < 0.01
    assert zero < 1e-6
    assert el < 60


# ---------------------------------------------------------------------------
# 10. torus vs line quantization through the discrete Zak transform
# ---------------------------------------------------------------------------

def test_criterion_10_cross_representation():
    t0 = time.monotonic()
    resid = zak_consistency_check(n_cells=16, n_x=8)   # 128-dim space
    el = time.monotonic() - t0
    ok = resid < 1e-8 and el < 60
    _report(10, "cross-representation", ok, f"residual {resid:.2e}",
            "1e-8", 60, el)
    assert resid < 1e-8
    assert el < 60
