"""External slowly-varying fields: derivative and force-sign oracles."""

import numpy as np
import pytest

from blochlab.fields import (PRESETS, custom_fourier, gaussian_window_fields,
                             preset, smooth_linear_phi, smooth_uniform_B,
                             zero_fields)
from blochlab.series import fd_gradient, fd_jacobian


def test_zero_fields_identity():
    f = zero_fields(2)
    r = np.array([[0.3, -0.2], [1.0, 2.0]])
    assert np.all(f.phi(r) == 0)
    assert np.all(f.A(r) == 0)
    assert np.all(f.B(r) == 0)


def test_b_is_antisymmetrized_jacobian():
    # [TRIVIAL] B_ij = d_i A_j - d_j A_i = (jac - jac^T)_ij
    f = custom_fourier(2, A_modes=[(0, (0.0, 1.0), 0.1 * np.exp(0.3j)),
                                   (1, (1.0, 0.0), 0.12)])
    r = np.array([0.4, -0.7])
    jac = f.jac_A(r)
    assert np.allclose(f.B(r), jac - jac.T, atol=1e-14)
    assert np.allclose(f.B(r), -f.B(r).T, atol=1e-14)


def test_gradients_match_fd():
    f = custom_fourier(2, phi_modes=[((1.0, 0.0), 0.2),
                                     ((0.0, 1.0), 0.15 * np.exp(0.4j))],
                       A_modes=[(0, (0.0, 1.0), 0.1 * np.exp(0.3j)),
                                (1, (1.0, 0.0), 0.12)])
    r = np.array([0.3, -0.5])
    assert np.allclose(f.grad_phi(r), fd_gradient(lambda x: f.phi(x), r),
                       atol=1e-9)
    # jac_A[i, j] = d A_j / d r_i
    assert np.allclose(f.jac_A(r), fd_jacobian(lambda x: f.A(x), r), atol=1e-8)
    assert np.allclose(f.hess_phi(r), fd_jacobian(lambda x: f.grad_phi(x), r),
                       atol=1e-8)
    assert np.allclose(f.grad_B(r), fd_jacobian(lambda x: f.B(x), r), atol=1e-8)


def test_gaussian_window_gradients_match_fd():
    f = gaussian_window_fields(1, phi_amp=0.3, phi_width=2.0, A_amp=[0.2],
                               A_width=3.0)
    r = np.array([0.9])
    assert np.allclose(f.grad_phi(r), fd_gradient(lambda x: f.phi(x), r),
                       atol=1e-9)
    assert np.allclose(f.jac_A(r), fd_jacobian(lambda x: f.A(x), r), atol=1e-8)


def test_lorentz_force_signs():
    # [DERIVED] F_j = -d_j phi - sum_i v_i B_ij.  With uniform B in the window
    # center and E = -grad phi: F = E - v x B in 2D components:
    # B_12 = b -> F_1 = E_1 - v_2 * B_21 ... explicitly F_j = E_j - (v B)_j.
    f = smooth_uniform_B(0.7, L=50.0)
    r = np.zeros(2)
    v = np.array([0.3, -0.4])
    B = f.B(r)
    assert np.isclose(B[0, 1], 0.7, atol=1e-6)
    F = f.lorentz_force(r, v)
    expect = -v @ B
    assert np.allclose(F, expect, atol=1e-12)


def test_linear_phi_window_center():
    f = smooth_linear_phi(2, [0.2, -0.1], L=40.0)
    # at the window center grad phi = -E0 (phi = -E0 . r locally)
    g = f.grad_phi(np.zeros(2))
    assert np.allclose(g, [-0.2, 0.1], atol=1e-8)


def test_preset_dispatch_and_unknown():
    assert "zero" in PRESETS
    f = preset("zero", 2)
    assert np.all(f.A(np.zeros(2)) == 0)
    with pytest.raises((KeyError, ValueError)):
        preset("nonexistent-preset", 2)
