"""Trigonometric interpolation oracles.

The fit is checked on inversion-ASYMMETRIC samples: an even function cannot
distinguish mode +n from mode -n, so symmetric test data would mask an index
flip in the FFT bookkeeping.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from blochlab.lattice import Lattice
from blochlab.bloch import make_kgrid
from blochlab.geometry import interpolate_field
from blochlab.series import (TrigPoly, fit_periodic_grid, fd_gradient,
                             fd_jacobian, zero_field)


def test_fit_recovers_modes_1d():
    # [DERIVED] cos k = (e^{ik}+e^{-ik})/2 and sin 2k = (e^{2ik}-e^{-2ik})/2i
    lat = Lattice(np.array([[1.0]]))
    kg = make_kgrid(lat, [16])
    f = lambda k: np.cos(k) + 0.3 * np.sin(2 * k)
    tp = fit_periodic_grid(f(kg[..., 0]), lat.dual, offset=0.5)
    modes = tp.mode_dict(np.eye(1))
    assert np.isclose(modes[(1,)], 0.5, atol=1e-13)
    assert np.isclose(modes[(2,)], -0.15j, atol=1e-13)
    assert np.isclose(modes[(-2,)], 0.15j, atol=1e-13)


def test_interpolant_exact_off_grid_asymmetric():
    lat = Lattice(np.array([[1.0]]))
    kg = make_kgrid(lat, [32])
    f = lambda k: np.cos(k) + 0.3 * np.sin(2 * k) + 0.1 * np.cos(3 * k + 0.4)
    interp = interpolate_field(f(kg[..., 0]), lat, 0.5)
    kt = np.array([[0.3], [1.234], [-2.0], [3.0]])
    assert np.max(np.abs(interp.value(kt) - f(kt[:, 0]))) < 1e-13


def test_interpolant_exact_2d_asymmetric():
    lat = Lattice(np.eye(2))
    kg = make_kgrid(lat, [12, 12])
    f = lambda kx, ky: np.cos(kx) + 0.5 * np.sin(ky) + 0.2 * np.cos(kx + 2 * ky - 0.3)
    interp = interpolate_field(f(kg[..., 0], kg[..., 1]), lat, 0.5)
    kt = np.array([[0.3, -1.1], [2.0, 0.7], [-2.9, 0.1]])
    assert np.max(np.abs(interp.value(kt) - f(kt[:, 0], kt[:, 1]))) < 1e-13


def test_interpolant_oblique_lattice_periodicity():
    # [TRIVIAL] result must be periodic under dual-lattice translations
    lat = Lattice(np.array([[1.0, 0.0], [0.4, 1.2]]))
    kg = make_kgrid(lat, [8, 8])
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(8, 8))
    interp = interpolate_field(vals, lat, 0.5)
    k = np.array([0.37, -0.81])
    for row in lat.dual:
        assert np.isclose(interp.value(k), interp.value(k + row), atol=1e-12)


def test_trigpoly_grad_hess_match_fd():
    tp = TrigPoly.from_modes({(1, 0): 0.3 + 0.2j, (0, 2): 0.1,
                              (1, 1): 0.05 - 0.02j}, np.eye(2))
    x = np.array([0.3, -0.7])
    g = tp.grad(x)
    g_fd = fd_gradient(lambda y: tp.value(y), x)
    assert np.allclose(g, g_fd, atol=1e-9)
    H = tp.hess(x)
    H_fd = fd_jacobian(lambda y: tp.grad(y), x)
    assert np.allclose(H, H_fd, atol=1e-8)


def test_hermitian_closure_real_valued():
    tp = TrigPoly.from_modes({(1,): 0.3 + 0.2j, (3,): -0.1j}, np.eye(1))
    x = np.linspace(-3, 3, 17)[:, None]
    v = tp.value(x)
    assert np.all(np.isreal(v))


def test_zero_field_is_zero():
    z = zero_field(2)
    x = np.array([[0.1, 0.2], [1.0, -1.0]])
    assert np.all(z.value(x) == 0)
    assert np.all(z.grad(x) == 0)
    assert np.all(z.hess(x) == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(-4, 4), st.integers(-4, 4))
def test_fit_roundtrip_random_modes(seed, n1, n2):
    # property: fitting samples of a TrigPoly returns the same function
    rng = np.random.default_rng(seed)
    modes = {(n1,): complex(rng.normal(), rng.normal()),
             (n2,): complex(rng.normal(), rng.normal())}
    tp = TrigPoly.from_modes(modes, np.eye(1))
    lat = Lattice(np.array([[1.0]]))
    kg = make_kgrid(lat, [16])
    refit = fit_periodic_grid(tp.value(kg[..., 0][..., None]), lat.dual, 0.5)
    kt = np.linspace(-np.pi, np.pi, 7)[:, None]
    assert np.max(np.abs(refit.value(kt) - tp.value(kt))) < 1e-11
