"""Smooth bounded external potentials phi(r), A(r) with analytic derivatives.

All field callables are vectorized: they accept points of shape (..., d) and
return arrays with the corresponding leading shape.  Index conventions:

    grad_phi[..., j]      = d phi / d r_j
    hess_phi[..., i, j]   = d^2 phi / d r_i d r_j
    jac_A[..., i, j]      = d A_j / d r_i
    hess_A[..., l, i, j]  = d^2 A_j / d r_l d r_i
    B[..., i, j]          = d_i A_j - d_j A_i          (antisymmetric 2-form)
    grad_B[..., l, i, j]  = d B_ij / d r_l
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Arr = np.ndarray


@dataclass(frozen=True)
class ExternalFields:
    d: int
    phi: Callable[[Arr], Arr]
    grad_phi: Callable[[Arr], Arr]
    hess_phi: Callable[[Arr], Arr]
    A: Callable[[Arr], Arr]
    jac_A: Callable[[Arr], Arr]
    hess_A: Callable[[Arr], Arr]
    name: str = "custom"

    def B(self, r: Arr) -> Arr:
        """Magnetic 2-form B_ij = d_i A_j - d_j A_i."""
        j = self.jac_A(r)
        return j - np.swapaxes(j, -1, -2)

    def grad_B(self, r: Arr) -> Arr:
        h = self.hess_A(r)
        return h - np.swapaxes(h, -1, -2)

    def lorentz_force(self, r: Arr, v: Arr) -> Arr:
        """Physical Lorentz force F_j = -d_j phi - sum_i v_i B_ij.

        With the 2-form B_ij = d_i A_j - d_j A_i this is the force appearing
        in the minimal-coupling equation kappadot = F(r, rdot); in d = 3 it
        reduces to -grad phi + v x curl A.
        """
        F = -self.grad_phi(r)
        if self.d > 1:
            F = F - np.einsum("...i,...ij->...j", np.asarray(v, float), self.B(r))
        return F

    def sup_bounds(self, region_half_width: float, samples: int = 2048,
                   seed: int = 0) -> dict:
        """Sampled sup of |phi|, |A|, |B| and first derivatives over a box."""
        rng = np.random.default_rng(seed)
        r = rng.uniform(-region_half_width, region_half_width, size=(samples, self.d))
        out = {
            "phi": float(np.max(np.abs(self.phi(r)))),
            "grad_phi": float(np.max(np.abs(self.grad_phi(r)))),
            "A": float(np.max(np.abs(self.A(r)))),
            "jac_A": float(np.max(np.abs(self.jac_A(r)))),
            "B": float(np.max(np.abs(self.B(r)))),
            "grad_B": float(np.max(np.abs(self.grad_B(r)))),
        }
        if not all(np.isfinite(v) for v in out.values()):
            raise ValueError("fields unbounded over the sampled region")
        return out


def lorentz_force(fields: ExternalFields, r, v):
    return fields.lorentz_force(np.asarray(r, float), np.asarray(v, float))


# ----------------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------------

def _zeros_like_point(r, *extra_dims):
    r = np.asarray(r, float)
    return np.zeros(r.shape[:-1] + extra_dims)


def zero_fields(d: int) -> ExternalFields:
    return ExternalFields(
        d=d,
        phi=lambda r: _zeros_like_point(r),
        grad_phi=lambda r: _zeros_like_point(r, d),
        hess_phi=lambda r: _zeros_like_point(r, d, d),
        A=lambda r: _zeros_like_point(r, d),
        jac_A=lambda r: _zeros_like_point(r, d, d),
        hess_A=lambda r: _zeros_like_point(r, d, d, d),
        name="zero",
    )


def smooth_linear_phi(d: int, E0, L: float) -> ExternalFields:
    """phi(r) = -|E0| L tanh(r.e / L): locally-linear potential, grad phi(0) = -E0."""
    E0 = np.atleast_1d(np.asarray(E0, dtype=float))
    amp = float(np.linalg.norm(E0))
    if amp == 0.0:
        return zero_fields(d)
    e = E0 / amp

    def s(r):
        return np.asarray(r, float) @ e

    def phi(r):
        return -amp * L * np.tanh(s(r) / L)

    def grad_phi(r):
        sech2 = 1.0 / np.cosh(s(r) / L) ** 2
        return -amp * sech2[..., None] * e

    def hess_phi(r):
        u = s(r) / L
        sech2 = 1.0 / np.cosh(u) ** 2
        coef = (2.0 * amp / L) * sech2 * np.tanh(u)
        return coef[..., None, None] * np.multiply.outer(e, e)

    z = zero_fields(d)
    return ExternalFields(d=d, phi=phi, grad_phi=grad_phi, hess_phi=hess_phi,
                          A=z.A, jac_A=z.jac_A, hess_A=z.hess_A,
                          name="smooth-linear-phi")


def smooth_uniform_B(B0: float, L: float) -> ExternalFields:
    """d=2 bounded vector potential with B(0) = B0 exactly.

    A(r) = (B0/2) (-r2, r1) exp(-|r|^2/L^2);  B_12(r) = B0 (1-u) e^{-u}, u=|r|^2/L^2.
    """
    d = 2

    def _w(r):
        r = np.asarray(r, float)
        u = np.sum(r * r, axis=-1) / L**2
        return 0.5 * B0 * np.exp(-u)

    def A(r):
        r = np.asarray(r, float)
        W = _w(r)
        return np.stack([-r[..., 1] * W, r[..., 0] * W], axis=-1)

    def _w_i(r):
        # dW/dr_i = -2 r_i W / L^2
        r = np.asarray(r, float)
        return -2.0 / L**2 * r * _w(r)[..., None]

    def jac_A(r):
        r = np.asarray(r, float)
        W = _w(r)
        Wi = _w_i(r)
        out = np.zeros(r.shape[:-1] + (d, d))
        # A_1 = -r2 W ; A_2 = r1 W
        out[..., 0, 0] = -r[..., 1] * Wi[..., 0]
        out[..., 1, 0] = -W - r[..., 1] * Wi[..., 1]
        out[..., 0, 1] = W + r[..., 0] * Wi[..., 0]
        out[..., 1, 1] = r[..., 0] * Wi[..., 1]
        return out

    def hess_A(r):
        r = np.asarray(r, float)
        W = _w(r)
        Wi = _w_i(r)
        # W_li = -2/L^2 (delta_li W + r_i W_l)
        eye = np.eye(d)
        Wli = -2.0 / L**2 * (eye * W[..., None, None]
                             + r[..., None, :] * Wi[..., :, None])
        out = np.zeros(r.shape[:-1] + (d, d, d))
        for l in range(d):
            for i in range(d):
                out[..., l, i, 0] = (-(i == 1) * Wi[..., l] - (l == 1) * Wi[..., i]
                                     - r[..., 1] * Wli[..., l, i])
                out[..., l, i, 1] = (((i == 0)) * Wi[..., l] + ((l == 0)) * Wi[..., i]
                                     + r[..., 0] * Wli[..., l, i])
        return out

    z = zero_fields(d)
    return ExternalFields(d=d, phi=z.phi, grad_phi=z.grad_phi, hess_phi=z.hess_phi,
                          A=A, jac_A=jac_A, hess_A=hess_A, name="smooth-uniform-B")


def custom_fourier(d: int, phi_modes=(), A_modes=()) -> ExternalFields:
    """Finite Fourier fields.

    phi_modes: iterable of (freq_vector nu, complex coeff c); phi = Re sum c e^{i nu.r}.
    A_modes:   iterable of (component j, freq_vector nu, complex coeff c).
    """
    pm = [(np.atleast_1d(np.asarray(nu, float)), complex(c)) for nu, c in phi_modes]
    am = [(int(j), np.atleast_1d(np.asarray(nu, float)), complex(c))
          for j, nu, c in A_modes]

    def phi(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1], dtype=complex)
        for nu, c in pm:
            out += c * np.exp(1j * (r @ nu))
        return out.real

    def grad_phi(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1] + (d,), dtype=complex)
        for nu, c in pm:
            out += (1j * c) * np.exp(1j * (r @ nu))[..., None] * nu
        return out.real

    def hess_phi(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1] + (d, d), dtype=complex)
        for nu, c in pm:
            out += (-c) * np.exp(1j * (r @ nu))[..., None, None] * np.multiply.outer(nu, nu)
        return out.real

    def A(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1] + (d,), dtype=complex)
        for j, nu, c in am:
            out[..., j] += c * np.exp(1j * (r @ nu))
        return out.real

    def jac_A(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1] + (d, d), dtype=complex)
        for j, nu, c in am:
            out[..., :, j] += (1j * c) * np.exp(1j * (r @ nu))[..., None] * nu
        return out.real

    def hess_A(r):
        r = np.asarray(r, float)
        out = np.zeros(r.shape[:-1] + (d, d, d), dtype=complex)
        for j, nu, c in am:
            out[..., :, :, j] += (-c) * np.exp(1j * (r @ nu))[..., None, None] \
                * np.multiply.outer(nu, nu)
        return out.real

    return ExternalFields(d=d, phi=phi, grad_phi=grad_phi, hess_phi=hess_phi,
                          A=A, jac_A=jac_A, hess_A=hess_A, name="custom-fourier")


def gaussian_window_fields(d: int, phi_amp=0.0, phi_width=1.0,
                           A_amp=None, A_width=1.0) -> ExternalFields:
    """Localized Gaussian window potentials (smooth, bounded, all derivatives).

    phi(r) = phi_amp * exp(-|r|^2/phi_width^2); A_j(r) = A_amp_j * exp(-|r|^2/A_width^2).
    Not one of the config presets; used programmatically for localized-field runs.
    """
    A_amp_v = np.zeros(d) if A_amp is None else np.atleast_1d(np.asarray(A_amp, float))

    def _bump(r, w):
        r = np.asarray(r, float)
        return np.exp(-np.sum(r * r, axis=-1) / w**2)

    def phi(r):
        return phi_amp * _bump(r, phi_width)

    def grad_phi(r):
        r = np.asarray(r, float)
        return phi_amp * _bump(r, phi_width)[..., None] * (-2.0 / phi_width**2) * r

    def hess_phi(r):
        r = np.asarray(r, float)
        g = _bump(r, phi_width)
        c = -2.0 / phi_width**2
        outer = np.einsum("...i,...j->...ij", r, r)
        eye = np.eye(d)
        return phi_amp * g[..., None, None] * (c * eye + c * c * outer)

    def A(r):
        return _bump(r, A_width)[..., None] * A_amp_v

    def jac_A(r):
        r = np.asarray(r, float)
        g = _bump(r, A_width)
        return (-2.0 / A_width**2) * g[..., None, None] \
            * np.einsum("...i,j->...ij", r, A_amp_v)

    def hess_A(r):
        r = np.asarray(r, float)
        g = _bump(r, A_width)
        c = -2.0 / A_width**2
        eye = np.eye(d)
        core = c * eye[..., :, :] + c * c * np.einsum("...l,...i->...li", r, r)
        return g[..., None, None, None] * np.einsum("...li,j->...lij", core, A_amp_v)

    return ExternalFields(d=d, phi=phi, grad_phi=grad_phi, hess_phi=hess_phi,
                          A=A, jac_A=jac_A, hess_A=hess_A, name="gaussian-window")


PRESETS = ("zero", "smooth-linear-phi", "smooth-uniform-B", "custom-fourier")


def preset(name: str, d: int, **params) -> ExternalFields:
    """Build one of the named field presets."""
    if name == "zero":
        return zero_fields(d)
    if name == "smooth-linear-phi":
        return smooth_linear_phi(d, params["E0"], params.get("L", 10.0))
    if name == "smooth-uniform-B":
        if d == 1:
            raise ValueError("B presets are undefined in d=1 (B is identically 0)")
        if d != 2:
            raise ValueError("smooth-uniform-B implemented for d=2")
        return smooth_uniform_B(params["B0"], params.get("L", 10.0))
    if name == "custom-fourier":
        return custom_fourier(d, params.get("phi_modes", ()),
                              params.get("A_modes", ()))
    raise ValueError(f"unknown field preset {name!r}")
