"""Microscopic 1D Schroedinger dynamics and wave-packet transport checks.

The microscopic Hamiltonian H = -(1/2) d^2/dx^2 + V(x) + phi(eps*x) acts on a
periodic box of n_cells lattice cells; the adiabatically scaled evolution
psi(t) = exp(-i H t / eps) psi(0) is integrated in microscopic time
tau = t/eps with a Strang splitting between H_per = T + V (applied exactly
fiber-by-fiber in the Bloch decomposition) and the slow potential phi(eps*x)
(diagonal in x).  Splitting this way makes the local error scale with the
commutator [H_per, phi(eps*.)] = O(eps), so macroscopic times are reachable
with O(10^4) steps.

Slowly varying observables a(k, r), periodic in k (period 2*pi/a) and in
r = eps*x (period L = eps*n_cells*a), are quantized in symmetric (Weyl)
ordering: the mode exp(i*g*a*k) exp(i*m*omega*r) acts as
exp(i*pi*m*g/n_cells) * exp(i*m*omega*eps*x) * (shift by g cells),
omega = 2*pi/L.  Expectations reduce to shift-and-multiply overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .bloch import BlochSpectrum, PeriodicPotential, band_project
from .effective import EffectiveModel


@dataclass(frozen=True)
class MicroGrid:
    """Real-space grid: n_cells cells, n_x points per cell, spacing a/n_x."""

    n_cells: int
    n_x: int
    a: float = 1.0

    @property
    def size(self) -> int:
        return self.n_cells * self.n_x

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.size) * self.a / self.n_x

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / (self.n_cells * self.a)

    @property
    def q(self) -> np.ndarray:
        """Plane-wave momenta in FFT order, shifted to the half-integer
        (antiperiodic) sector that the cell-centered Bloch grid fibers."""
        return (2.0 * np.pi * np.fft.fftfreq(self.size, d=self.a / self.n_x)
                + 0.5 * self.dk)

    @property
    def ramp(self) -> np.ndarray:
        """exp(i dk x / 2): maps antiperiodic momenta onto the plain FFT."""
        return np.exp(0.5j * self.dk * self.x)


class BlochSplitPropagator:
    """Strang splitting exp(-i dt phi/2) exp(-i dt H_per) exp(-i dt phi/2).

    The periodic part is applied exactly: in momentum space H_per is
    block-diagonal over the n_cells Bloch fibers (n_x plane waves each), and
    the per-fiber propagators are precomputed by diagonalization.
    """

    def __init__(self, potential: PeriodicPotential, grid: MicroGrid,
                 phi_values: np.ndarray, dtau: float):
        self.grid = grid
        self.dtau = float(dtau)
        N = grid.size
        nc, nx = grid.n_cells, grid.n_x
        q = grid.q
        f = np.rint((q - 0.5 * grid.dk) * grid.a * nc
                    / (2.0 * np.pi)).astype(int)   # integer FFT frequency
        # group momenta into fibers by residue mod n_cells
        self._fiber_idx = []
        self._fiber_U = []
        for c in range(nc):
            idx = np.where(np.mod(f, nc) == c)[0]
            if idx.size != nx:
                raise RuntimeError("fiber decomposition failed")
            H = np.zeros((nx, nx), dtype=complex)
            H[np.diag_indices(nx)] = 0.5 * q[idx] ** 2
            for aa in range(nx):
                for bb in range(nx):
                    g = f[idx[aa]] - f[idx[bb]]
                    g = (g + N // 2) % N - N // 2
                    if g % nc:
                        raise RuntimeError("fiber coupling misaligned")
                    H[aa, bb] += potential.vhat((g // nc,))
            w, V = sla.eigh(H)
            self._fiber_idx.append(idx)
            self._fiber_U.append((V * np.exp(-1j * self.dtau * w)) @ np.conj(V).T)
        self._half_phi = np.exp(-0.5j * self.dtau * np.asarray(phi_values))
        self._ramp = grid.ramp

    def _apply_periodic(self, psi_hat: np.ndarray) -> np.ndarray:
        out = np.empty_like(psi_hat)
        for idx, U in zip(self._fiber_idx, self._fiber_U):
            out[idx] = U @ psi_hat[idx]
        return out

    def run(self, psi: np.ndarray, tau_total: float) -> np.ndarray:
        nsteps = int(round(tau_total / self.dtau))
        if abs(nsteps * self.dtau - tau_total) > 1e-10 * max(1.0, tau_total):
            raise ValueError("tau_total must be an integer number of steps")
        psi = np.asarray(psi, dtype=complex)
        for _ in range(nsteps):
            psi = psi * self._half_phi
            psi_hat = np.fft.fft(psi * np.conj(self._ramp))
            psi = self._ramp * np.fft.ifft(self._apply_periodic(psi_hat))
            psi = psi * self._half_phi
        return psi


def propagate(potential: PeriodicPotential, grid: MicroGrid, phi_fn,
              eps: float, psi0: np.ndarray, t: float,
              dtau: float = 0.02) -> np.ndarray:
    """psi(t) = exp(-i H t / eps) psi0 with H = H_per + phi(eps*x)."""
    if t == 0.0:
        return np.asarray(psi0, dtype=complex).copy()
    tau = t / eps
    nsteps = max(1, int(round(tau / dtau)))
    prop = BlochSplitPropagator(potential, grid, phi_fn(eps * grid.x),
                                tau / nsteps)
    return prop.run(psi0, tau)


def prepare_band_packet(spectrum: BlochSpectrum, n: int, grid: MicroGrid,
                        eps: float, k0: float = 0.0, sigma_r: float = 0.8,
                        r0: float = None) -> np.ndarray:
    """Normalized band-n wave packet: Gaussian envelope of macroscopic width
    sigma_r (microscopic sigma_r/eps) modulated at k0, then band-projected."""
    x = grid.x
    box = grid.n_cells * grid.a
    x0 = 0.5 * box if r0 is None else r0 / eps
    dx = np.mod(x - x0 + 0.5 * box, box) - 0.5 * box   # minimal image
    psi = np.exp(-dx**2 * eps**2 / (2.0 * sigma_r**2)) * np.exp(1j * k0 * x)
    psi = band_project(psi, spectrum, n, grid.n_cells, grid.a)
    nrm = np.linalg.norm(psi)
    if nrm < 1e-10:
        raise ValueError("band projection annihilated the packet; adjust k0")
    return psi / nrm


# ----------------------------------------------------------------------------
# slowly varying observables (line Weyl quantization)
# ----------------------------------------------------------------------------

def fit_line_symbol(a_fn, a: float, L: float, n_k: int, n_r: int) -> np.ndarray:
    """Centered Fourier coefficients C[g, m] of a(k, r) on the torus
    k in [-pi/a, pi/a), r in [-L/2, L/2)."""
    if n_k % 2 or n_r % 2:
        raise ValueError("fit sizes must be even")
    kf = -np.pi / a + 2.0 * np.pi * np.arange(n_k) / (a * n_k)
    rf = -0.5 * L + L * np.arange(n_r) / n_r
    vals = np.asarray(a_fn(kf[:, None], rf[None, :]), dtype=complex)
    D = np.fft.fft2(vals) / (n_k * n_r)
    signs = ((-1.0) ** np.arange(n_k))[:, None] * ((-1.0) ** np.arange(n_r))[None, :]
    return np.fft.fftshift(D * signs)


def expect_symbol(psi: np.ndarray, C: np.ndarray, grid: MicroGrid,
                  eps: float) -> float:
    """<psi, Op_eps(a) psi> for a normalized state and symbol coefficients C.

    Requires eps*n_cells*a = L (the slow torus closes on the box).
    """
    n_k, n_r = C.shape
    nc, nx = grid.n_cells, grid.n_x
    L = eps * nc * grid.a
    x = grid.x
    psi = np.asarray(psi, dtype=complex)
    gs = np.arange(n_k) - n_k // 2
    ms = np.arange(n_r) - n_r // 2

    def shift_cells(g):
        """Twisted translation by g cells (antiperiodic sector, even nc)."""
        cols = np.arange(psi.size) + int(g) * nx
        sign = (-1.0) ** ((nc + 1) * (cols // psi.size))
        return sign * psi[np.mod(cols, psi.size)]

    # W[gi, :] = conj(psi) * (shift by g cells applied to psi)
    W = np.stack([np.conj(psi) * shift_cells(g) for g in gs])
    phases = np.exp(2j * np.pi * np.outer(eps * x / L, ms))   # (N, n_r)
    O = W @ phases                                            # (n_k, n_r)
    half = np.exp(1j * np.pi * np.outer(gs, ms) / nc)
    return float(np.real(np.sum(C * half * O)))


# ----------------------------------------------------------------------------
# transported symbol through the corrected chart (A = 0, d = 1)
# ----------------------------------------------------------------------------

def chain_transported_symbol(model: EffectiveModel, a_fn, t: float, L: float,
                             generator: str = "corrected", n_k: int = 32,
                             n_r: int = 64, steps_per_unit: int = 400):
    """Coefficients of a o T_eps o Phi_t o T_eps^{-1} on the (k, r) torus.

    With A = 0 the chart T_eps(k, r) = (k, r + eps*A_b(k)) has the exact
    inverse (k, r - eps*A_b(k)).  Phi_t is the canonical flow of h_cl
    ("corrected") or of h0 ("leading").
    """
    from .flow import flow_map
    a_lat = model.band.lattice.direct[0, 0]
    kf = -np.pi / a_lat + 2.0 * np.pi * np.arange(n_k) / (a_lat * n_k)
    rf = -0.5 * L + L * np.arange(n_r) / n_r
    K, R = np.meshgrid(kf, rf, indexing="ij")
    kpts = K.ravel()[:, None]
    rpts = R.ravel()[:, None]
    Ab = model.band.A(kpts)
    z0 = np.concatenate([rpts - model.eps * Ab, kpts], axis=-1)  # T^{-1}
    mdl = model.with_eps(0.0) if generator == "leading" else model
    if generator not in ("leading", "corrected"):
        raise ValueError("generator must be 'leading' or 'corrected'")
    if t != 0.0:
        zt = flow_map(mdl, "canonical", z0, t, 1.0 / steps_per_unit)
    else:
        zt = z0
    rt, kt = zt[..., 0:1], zt[..., 1:2]
    rt = rt + model.eps * model.band.A(kt)                       # T
    vals = np.asarray(a_fn(kt, rt)).reshape(n_k, n_r).astype(complex)
    D = np.fft.fft2(vals) / (n_k * n_r)
    signs = ((-1.0) ** np.arange(n_k))[:, None] * ((-1.0) ** np.arange(n_r))[None, :]
    return np.fft.fftshift(D * signs)


def egorov_quantum_gap(potential: PeriodicPotential, spectrum: BlochSpectrum,
                       model: EffectiveModel, grid: MicroGrid, a_fn,
                       t: float, k0: float = 0.0, sigma_r: float = 0.8,
                       dtau: float = 0.02, n_k: int = 32, n_r: int = 64,
                       steps_per_unit: int = 400, band: int = 0,
                       psi0: np.ndarray = None) -> dict:
    """Expectation-level transport comparison at one (eps, t).

    Returns the quantum expectation <psi(t), Op(a) psi(t)> and, for both
    classical generators, |quantum - <psi0, Op(a o chain_t) psi0>|.
    """
    eps = model.eps
    L = eps * grid.n_cells * grid.a
    if psi0 is None:
        psi0 = prepare_band_packet(spectrum, band, grid, eps, k0=k0,
                                   sigma_r=sigma_r)
    psi_t = propagate(potential, grid,
                      lambda r: model.fields.phi(np.asarray(r, float)[..., None]),
                      eps, psi0, t, dtau)
    Ca = fit_line_symbol(a_fn, grid.a, L, n_k, n_r)
    quantum = expect_symbol(psi_t, Ca, grid, eps)
    out = {"t": t, "eps": eps, "quantum": quantum}
    for gen in ("corrected", "leading"):
        C = chain_transported_symbol(model, a_fn, t, L, gen, n_k, n_r,
                                     steps_per_unit)
        classical = expect_symbol(psi0, C, grid, eps)
        out[gen] = classical
        out[f"gap_{gen}"] = abs(quantum - classical)
    return out
