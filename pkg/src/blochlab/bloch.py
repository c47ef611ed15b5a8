"""Fibered periodic Hamiltonian in a plane-wave basis, bands, and Zak transform."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .lattice import Lattice


class ConvergenceError(RuntimeError):
    """Cutoff too small for the requested bands (strict mode)."""


class DegenerateBandError(RuntimeError):
    """A band is degenerate (within tolerance) at some grid point."""


@dataclass(frozen=True)
class PeriodicPotential:
    """V_Gamma(x) = sum_G vhat(G) e^{iG.x}, finitely many Fourier coefficients.

    Coefficients are keyed by integer dual-lattice coordinates.
    """

    lattice: Lattice
    coeffs: dict  # {integer tuple: complex}

    def __post_init__(self):
        clean = {}
        for g, c in self.coeffs.items():
            g = tuple(int(v) for v in np.atleast_1d(g))
            clean[g] = complex(c)
        for g, c in clean.items():
            gm = tuple(-v for v in g)
            if gm not in clean or abs(np.conj(clean[gm]) - c) > 1e-12:
                raise ValueError(
                    f"potential not real: missing/unmatched conjugate mode for {g}")
        object.__setattr__(self, "coeffs", clean)

    def vhat(self, gint) -> complex:
        return self.coeffs.get(tuple(int(v) for v in np.atleast_1d(gint)), 0.0 + 0.0j)

    def max_mode(self) -> int:
        if not self.coeffs:
            return 0
        return max(max(abs(v) for v in g) for g in self.coeffs)

    def on_points(self, x: np.ndarray) -> np.ndarray:
        """Real-space values V(x) for points of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.lattice.d:
            x = x[..., None] if self.lattice.d == 1 else x
        out = np.zeros(x.shape[:-1], dtype=complex)
        for g, c in self.coeffs.items():
            G = np.asarray(g, float) @ self.lattice.dual
            out += c * np.exp(1j * (x @ G))
        return out.real


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Dual-lattice vectors |G| <= cutoff, lexicographically ordered."""

    lattice: Lattice
    cutoff: float
    gint: np.ndarray = field(default=None)        # type: ignore[assignment]
    gcart: np.ndarray = field(default=None)       # type: ignore[assignment]

    def __post_init__(self):
        lat = self.lattice
        # conservative integer search range per axis
        lens = np.linalg.norm(lat.dual, axis=1)
        nmax = int(np.ceil(self.cutoff / lens.min())) + 1
        members = []
        for n in itertools.product(range(-nmax, nmax + 1), repeat=lat.d):
            G = np.asarray(n, float) @ lat.dual
            if np.linalg.norm(G) <= self.cutoff + 1e-12:
                members.append(n)
        members.sort()
        gint = np.array(members, dtype=int).reshape(len(members), lat.d)
        object.__setattr__(self, "gint", gint)
        object.__setattr__(self, "gcart", gint.astype(float) @ lat.dual)
        object.__setattr__(self, "_index",
                           {tuple(g): i for i, g in enumerate(gint)})

    @property
    def size(self) -> int:
        return self.gint.shape[0]

    def index_of(self, gint) -> Optional[int]:
        return self._index.get(tuple(int(v) for v in np.atleast_1d(gint)))

    def shift_states(self, vecs: np.ndarray, gstar_int) -> np.ndarray:
        """Re-index plane-wave coefficients under k -> k + gstar (equivariance).

        An eigenvector at k maps to one at k + gstar via c'_G = c_{G + gstar};
        components falling outside the truncated basis are dropped.
        """
        gstar_int = np.atleast_1d(np.asarray(gstar_int, int))
        out = np.zeros_like(vecs)
        for i, g in enumerate(self.gint):
            j = self.index_of(g + gstar_int)
            if j is not None:
                out[i] = vecs[j]
        return out


def assemble_hper(k, V: PeriodicPotential, basis: PlaneWaveBasis) -> np.ndarray:
    """Matrix of H_per(k): 0.5|k+G|^2 on the diagonal plus vhat(G-G')."""
    if V.lattice is not basis.lattice and not np.allclose(
            V.lattice.direct, basis.lattice.direct):
        raise ValueError("potential and basis lattices differ")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    n = basis.size
    H = np.zeros((n, n), dtype=complex)
    for g, c in V.coeffs.items():
        g = np.asarray(g, int)
        for i, gi in enumerate(basis.gint):
            j = basis.index_of(gi - g)
            if j is not None:
                H[i, j] += c
    kin = 0.5 * np.sum((k + basis.gcart) ** 2, axis=1)
    H[np.diag_indices(n)] += kin
    return H


def make_kgrid(lattice: Lattice, shape, offset: float = 0.5) -> np.ndarray:
    """Uniform cell-centered grid over the centered dual cell; shape (*N, d).

    Points t_j = (i_j + offset)/N_j - 1/2 in reduced coordinates (no duplicated
    boundary point; offset 0.5 also avoids the zone-boundary degeneracies).
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    axes = [(np.arange(N) + offset) / N - 0.5 for N in shape]
    T = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return T @ lattice.dual


@dataclass
class BlochSpectrum:
    """Eigen-data of H_per(k) on a k-grid (all truncated bands retained)."""

    lattice: Lattice
    basis: PlaneWaveBasis
    potential: PeriodicPotential
    kpoints: np.ndarray      # (*grid, d)
    energies: np.ndarray     # (*grid, n_pw) increasing per k
    vectors: np.ndarray      # (*grid, n_pw, n_pw) columns = eigenvectors
    convergence: dict = field(default_factory=dict)

    @property
    def grid_shape(self):
        return self.kpoints.shape[:-1]

    @property
    def nbands(self) -> int:
        return self.energies.shape[-1]

    def hamiltonian_at(self, k) -> np.ndarray:
        return assemble_hper(k, self.potential, self.basis)

    def solve_at(self, k):
        """Dense diagonalization at an arbitrary k (off-grid evaluation)."""
        return sla.eigh(self.hamiltonian_at(k))

    def dhamiltonian(self, k) -> np.ndarray:
        """d H_per/d k_j at k: diagonal matrices (k+G)_j; shape (d, n, n)."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        kg = k + self.basis.gcart
        d = self.lattice.d
        n = self.basis.size
        out = np.zeros((d, n, n), dtype=complex)
        for j in range(d):
            out[j][np.diag_indices(n)] = kg[:, j]
        return out

    def shift_states(self, vecs, gstar_int):
        return self.basis.shift_states(vecs, gstar_int)


def solve_bands(V: PeriodicPotential, basis: PlaneWaveBasis, kgrid: np.ndarray,
                nbands: Optional[int] = None, check_convergence: bool = False,
                conv_tol: float = 1e-8, strict: bool = False) -> BlochSpectrum:
    """Diagonalize H_per(k) over the grid; eigenvalues sorted increasingly."""
    kgrid = np.asarray(kgrid, dtype=float)
    gshape = kgrid.shape[:-1]
    n = basis.size
    if nbands is not None and nbands > n // 2:
        raise ValueError("requested bands too close to the truncation edge "
                         "(need nbands <= n_pw/2); increase the cutoff")
    energies = np.empty(gshape + (n,))
    vectors = np.empty(gshape + (n, n), dtype=complex)
    for idx in np.ndindex(*gshape):
        H = assemble_hper(kgrid[idx], V, basis)
        w, v = sla.eigh(H)
        energies[idx] = w
        vectors[idx] = v
    conv = {}
    if check_convergence:
        nb = nbands if nbands is not None else max(1, n // 4)
        big = PlaneWaveBasis(basis.lattice, basis.cutoff * 2.0)
        worst = 0.0
        flat = kgrid.reshape(-1, kgrid.shape[-1])
        for k in flat[:: max(1, len(flat) // 4)]:
            w_small = np.sort(sla.eigvalsh(assemble_hper(k, V, basis)))[:nb]
            w_big = np.sort(sla.eigvalsh(assemble_hper(k, V, big)))[:nb]
            worst = max(worst, float(np.max(np.abs(w_small - w_big))))
        conv = {"max_band_shift": worst, "tol": conv_tol, "converged": worst < conv_tol}
        if strict and not conv["converged"]:
            raise ConvergenceError(
                f"bands move by {worst:.3e} under cutoff doubling (tol {conv_tol})")
    return BlochSpectrum(lattice=basis.lattice, basis=basis, potential=V,
                         kpoints=kgrid, energies=energies, vectors=vectors,
                         convergence=conv)


def gap_check(spectrum: BlochSpectrum, n: int, threshold: float = 1e-6) -> dict:
    """Minimal distance of band n to its neighbors over the grid."""
    E = spectrum.energies.reshape(-1, spectrum.nbands)
    gaps = []
    if n > 0:
        gaps.append(np.min(E[:, n] - E[:, n - 1]))
    if n + 1 < spectrum.nbands:
        gaps.append(np.min(E[:, n + 1] - E[:, n]))
    cg = float(min(gaps)) if gaps else np.inf
    return {"band": n, "C_g": cg, "isolated": bool(cg > threshold)}


# ----------------------------------------------------------------------------
# Discrete Zak transform (d = 1)
# ----------------------------------------------------------------------------

@dataclass
class ZakGrid:
    """Zak amplitudes on the (k_j, y_s) grid: N_cells cell-centered momenta
    in the centered dual cell, N_x intra-cell points."""

    amplitudes: np.ndarray   # (N_cells, N_x) complex
    kpoints: np.ndarray      # (N_cells,)
    ypoints: np.ndarray      # (N_x,)
    a: float
    n_cells: int
    n_x: int


def _zak_geometry(n_total: int, n_cells: int, a: float):
    if n_total % n_cells:
        raise ValueError("grid size not factorable as cells x intra-cell points")
    n_x = n_total // n_cells
    dk = 2.0 * np.pi / (n_cells * a)
    kpts = (np.arange(n_cells) + 0.5) * dk - np.pi / a
    ypts = np.arange(n_x) * a / n_x
    return n_x, kpts, ypts


def zak_forward(psi: np.ndarray, n_cells: int, a: float = 1.0) -> ZakGrid:
    """U psi (k_j, y_s) = N_c^{-1/2} sum_n e^{-i(y_s + n a) k_j} psi(n a + y_s)."""
    psi = np.asarray(psi, dtype=complex)
    n_x, kpts, ypts = _zak_geometry(psi.size, n_cells, a)
    block = psi.reshape(n_cells, n_x)
    n = np.arange(n_cells)
    # e^{-i n a k_j} = e^{-2 pi i n j / Nc} * e^{i pi n (1 - 1/Nc)}
    mod = np.exp(1j * np.pi * n * (1.0 - 1.0 / n_cells))
    amp = np.fft.fft(block * mod[:, None], axis=0) / np.sqrt(n_cells)
    amp = amp * np.exp(-1j * np.outer(kpts, ypts))
    return ZakGrid(amplitudes=amp, kpoints=kpts, ypoints=ypts, a=a,
                   n_cells=n_cells, n_x=n_x)


def zak_inverse(z: ZakGrid) -> np.ndarray:
    amp = z.amplitudes * np.exp(1j * np.outer(z.kpoints, z.ypoints))
    n = np.arange(z.n_cells)
    mod = np.exp(1j * np.pi * n * (1.0 - 1.0 / z.n_cells))
    block = np.fft.ifft(amp, axis=0) * np.sqrt(z.n_cells) / mod[:, None]
    return block.reshape(-1)


def zak_at_k(psi: np.ndarray, n_cells: int, k: float, a: float = 1.0) -> np.ndarray:
    """Defining sum evaluated at an arbitrary momentum (oracle for BF2)."""
    psi = np.asarray(psi, dtype=complex)
    n_x, _, ypts = _zak_geometry(psi.size, n_cells, a)
    block = psi.reshape(n_cells, n_x)
    n = np.arange(n_cells)
    out = (block * np.exp(-1j * n * a * k)[:, None]).sum(axis=0) / np.sqrt(n_cells)
    return out * np.exp(-1j * ypts * k)


def bloch_states_on_cell(spectrum: BlochSpectrum, kindex: int,
                         n_x: int) -> np.ndarray:
    """Columns: Bloch functions phi_n(k, y_s) on the intra-cell grid.

    Requires every basis harmonic to be representable on the y-grid.
    """
    gints = spectrum.basis.gint[:, 0]
    if np.max(np.abs(gints)) >= n_x / 2:
        raise ValueError("intra-cell grid too coarse for the plane-wave cutoff")
    s = np.arange(n_x)
    W = np.exp(2j * np.pi * np.outer(s, gints) / n_x)   # (n_x, n_pw)
    idx = np.unravel_index(kindex, spectrum.grid_shape)
    return W @ spectrum.vectors[idx]                    # (n_x, n_pw) band columns


def band_project(psi: np.ndarray, spectrum: BlochSpectrum, n: int,
                 n_cells: int, a: float = 1.0,
                 degeneracy_tol: float = 1e-10) -> np.ndarray:
    """Apply the spectral band projector P_n via Zak transform + fiber projection."""
    z = zak_forward(psi, n_cells, a)
    E = spectrum.energies.reshape(n_cells, -1)
    for j in range(n_cells):
        neighbors = []
        if n > 0:
            neighbors.append(E[j, n] - E[j, n - 1])
        if n + 1 < E.shape[1]:
            neighbors.append(E[j, n + 1] - E[j, n])
        if neighbors and min(neighbors) < degeneracy_tol:
            raise DegenerateBandError(f"band {n} degenerate at grid k index {j}")
    out = np.zeros_like(z.amplitudes)
    for j in range(n_cells):
        phi = bloch_states_on_cell(spectrum, j, z.n_x)[:, n]
        amp = np.vdot(phi, z.amplitudes[j]) / z.n_x
        out[j] = amp * phi
    z2 = ZakGrid(amplitudes=out, kpoints=z.kpoints, ypoints=z.ypoints, a=z.a,
                 n_cells=z.n_cells, n_x=z.n_x)
    return zak_inverse(z2)
