"""Trigonometric polynomials and spectral interpolation of periodic grid fields.

A `TrigPoly` represents  f(x) = sum_n c_n exp(i (n @ F) . x)  for integer mode
vectors n and a base frequency matrix F (rows = generating frequency vectors).
For a field periodic under x -> x + p_j (rows of a period basis P), the
generating frequencies are the rows of dual_basis(P), and modes are integers.

Evaluation, gradients and Hessians are analytic and vectorized over points of
shape (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import dual_basis


@dataclass
class TrigPoly:
    freqs: np.ndarray    # (n_modes, d) frequency vectors
    coeffs: np.ndarray   # (n_modes,) complex
    is_real: bool = True

    def __post_init__(self):
        self.freqs = np.atleast_2d(np.asarray(self.freqs, dtype=float))
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.freqs.shape[0] != self.coeffs.shape[0]:
            raise ValueError("freqs and coeffs length mismatch")

    @property
    def d(self) -> int:
        return self.freqs.shape[1]

    @classmethod
    def from_modes(cls, modes: dict, base: np.ndarray, is_real: bool = True,
                   hermitian_close: bool = True) -> "TrigPoly":
        """Build from {integer tuple n: coeff} with frequency n @ base.

        With hermitian_close the conjugate modes are added so the result is real.
        """
        base = np.atleast_2d(np.asarray(base, dtype=float))
        acc: dict = {}
        for n, c in modes.items():
            n = tuple(int(v) for v in np.atleast_1d(n))
            acc[n] = acc.get(n, 0.0) + complex(c)
            if hermitian_close:
                nn = tuple(-v for v in n)
                if nn != n:
                    acc[nn] = acc.get(nn, 0.0) + np.conj(complex(c))
                else:
                    acc[n] = complex(acc[n]).real + 0j if np.isreal(acc[n]) else acc[n]
        keys = sorted(acc.keys())
        freqs = np.array([np.asarray(k, float) @ base for k in keys])
        coeffs = np.array([acc[k] for k in keys])
        return cls(freqs=freqs, coeffs=coeffs, is_real=is_real)

    def _phase(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        return np.exp(1j * (x @ self.freqs.T))        # (..., n_modes)

    def value(self, x):
        out = self._phase(x) @ self.coeffs
        return out.real if self.is_real else out

    def grad(self, x):
        ph = self._phase(x)
        out = np.einsum("...m,m,mj->...j", ph, 1j * self.coeffs, self.freqs)
        return out.real if self.is_real else out

    def hess(self, x):
        ph = self._phase(x)
        ff = np.einsum("mi,mj->mij", self.freqs, self.freqs)
        out = np.einsum("...m,m,mij->...ij", ph, -self.coeffs, ff)
        return out.real if self.is_real else out

    def mode_dict(self, base: np.ndarray, tol: float = 1e-12) -> dict:
        """Integer-mode representation relative to `base` (rows = generators)."""
        base = np.atleast_2d(np.asarray(base, dtype=float))
        sol = self.freqs @ np.linalg.inv(base)
        n = np.rint(sol)
        if np.max(np.abs(sol - n), initial=0.0) > 1e-8:
            raise ValueError("frequencies are not integer multiples of the base")
        out = {}
        for ni, c in zip(n.astype(int), self.coeffs):
            if abs(c) > tol:
                out[tuple(ni)] = out.get(tuple(ni), 0.0) + c
        return out


def fit_periodic_grid(values: np.ndarray, period_basis: np.ndarray,
                      offset: float = 0.5, is_real: bool = True,
                      tol: float = 0.0) -> TrigPoly:
    """Spectral (trigonometric) fit of samples on a uniform periodic grid.

    `values` has shape (N_1, ..., N_d); sample i sits at
    x_i = sum_j ((i_j + offset)/N_j - 1/2) p_j with p_j the rows of
    `period_basis`.  Exact at grid points; spectrally accurate for smooth fields.
    """
    values = np.asarray(values)
    period_basis = np.atleast_2d(np.asarray(period_basis, dtype=float))
    d = period_basis.shape[0]
    if values.ndim != d:
        raise ValueError("values rank must equal the lattice dimension")
    shape = values.shape
    coef = np.fft.fftn(values) / values.size
    # undo the grid phase so coefficients refer to e^{2 pi i n.t}, t in [-1/2,1/2)
    for ax, N in enumerate(shape):
        n = np.fft.fftfreq(N, 1.0 / N)
        ph = np.exp(-2j * np.pi * n * (offset / N - 0.5))
        sl = [None] * d
        sl[ax] = slice(None)
        coef = coef * ph[tuple(sl)]
    base = dual_basis(period_basis)   # frequency generators
    grids = np.meshgrid(*[np.fft.fftfreq(N, 1.0 / N) for N in shape], indexing="ij")
    nmat = np.stack([g.ravel() for g in grids], axis=-1)
    cvec = coef.ravel()
    if tol > 0.0:
        keep = np.abs(cvec) > tol * np.max(np.abs(cvec))
        nmat, cvec = nmat[keep], cvec[keep]
    return TrigPoly(freqs=nmat @ base, coeffs=cvec, is_real=is_real)


@dataclass
class CallableField:
    """Adapter giving arbitrary callables the TrigPoly value/grad/hess interface."""

    value_fn: callable
    grad_fn: callable = None
    hess_fn: callable = None

    def value(self, x):
        return self.value_fn(np.asarray(x, dtype=float))

    def grad(self, x):
        if self.grad_fn is None:
            raise NotImplementedError("no gradient supplied")
        return self.grad_fn(np.asarray(x, dtype=float))

    def hess(self, x):
        if self.hess_fn is None:
            raise NotImplementedError("no Hessian supplied")
        return self.hess_fn(np.asarray(x, dtype=float))


def zero_field(d: int) -> TrigPoly:
    """The identically-zero periodic field in d variables."""
    return TrigPoly(freqs=np.zeros((1, d)), coeffs=np.zeros(1, dtype=complex))


# ----------------------------------------------------------------------------
# finite-difference helpers (oracles for analytic derivatives)
# ----------------------------------------------------------------------------

def fd_gradient(f, x, h: float = 1e-4):
    """4th-order central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = 1.0
        g[j] = (-f(x + 2 * h * e) + 8 * f(x + h * e)
                - 8 * f(x - h * e) + f(x - 2 * h * e)) / (12 * h)
    return g


def fd_jacobian(f, x, h: float = 1e-5):
    """Centered Jacobian J[i, j] = d f_j / d x_i."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((x.size,) + f0.shape)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        J[i] = (np.asarray(f(x + h * e)) - np.asarray(f(x - h * e))) / (2 * h)
    return J
