"""Band geometry for an isolated nondegenerate band.

Berry connection A(k) = i <u, grad_k u> (gauge fixed by parallel transport),
curvature Omega and moment M via gauge-invariant sums over states, plaquette
(Wilson-loop) curvature and Chern numbers, and spectral interpolation of
periodic grid fields.

All functions take a "spectrum-like" object: attributes lattice, kpoints,
energies, vectors and methods dhamiltonian(k), solve_at(k),
shift_states(vecs, gstar_int).  Both BlochSpectrum and the synthetic
TwoLevelModel satisfy this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import DegenerateBandError
from .lattice import Lattice
from .series import TrigPoly, fit_periodic_grid


def _check_isolated(E: np.ndarray, n: int, tol: float):
    scale = max(np.ptp(E), 1.0)
    if n > 0 and np.min(E[..., n] - E[..., n - 1]) < tol * scale:
        k_bad = np.unravel_index(np.argmin(E[..., n] - E[..., n - 1]), E.shape[:-1])
        raise DegenerateBandError(f"band {n} degenerate with {n-1} near grid {k_bad}")
    if n + 1 < E.shape[-1] and np.min(E[..., n + 1] - E[..., n]) < tol * scale:
        k_bad = np.unravel_index(np.argmin(E[..., n + 1] - E[..., n]), E.shape[:-1])
        raise DegenerateBandError(f"band {n} degenerate with {n+1} near grid {k_bad}")


def velocity_matrix(spec, k, vectors=None) -> np.ndarray:
    """v^j_{mn} = <u_m | dH/dk_j | u_n> at k; shape (d, nb, nb), Hermitian."""
    if vectors is None:
        _, vectors = spec.solve_at(k)
    dH = spec.dhamiltonian(k)
    return np.stack([np.conj(vectors).T @ dH[j] @ vectors
                     for j in range(dH.shape[0])])


def _sum_over_states(E, v, n, power):
    """sum_{m != n} v^i_{nm} v^j_{mn} / (E_n - E_m)^power, shape (d, d) complex."""
    nb = E.shape[-1]
    mask = np.ones(nb, dtype=bool)
    mask[n] = False
    denom = (E[n] - E[mask]) ** power
    vi_nm = v[:, n, mask]                       # (d, nb-1)
    vj_mn = v[:, mask, n]                       # (d, nb-1)
    return np.einsum("im,jm,m->ij", vi_nm, vj_mn, 1.0 / denom)


def berry_curvature_at(spec, n: int, k) -> np.ndarray:
    """Omega_ij at an arbitrary k via the off-band resolvent sum; shape (d, d)."""
    E, V = spec.solve_at(k)
    v = velocity_matrix(spec, k, V)
    return -2.0 * _sum_over_states(E, v, n, 2).imag


def rammal_wilkinson_at(spec, n: int, k) -> np.ndarray:
    E, V = spec.solve_at(k)
    v = velocity_matrix(spec, k, V)
    return -0.5 * _sum_over_states(E, v, n, 1).imag


def berry_curvature(spec, n: int, degeneracy_tol: float = 1e-8) -> np.ndarray:
    """Omega_ij(k) = -2 Im sum_{m!=n} v^i_{nm} v^j_{mn} / (E_n - E_m)^2.

    Returns the antisymmetric field with shape (*grid, d, d).
    """
    E = spec.energies
    _check_isolated(E, n, degeneracy_tol)
    gshape = E.shape[:-1]
    d = spec.kpoints.shape[-1]
    out = np.zeros(gshape + (d, d))
    for idx in np.ndindex(*gshape):
        v = velocity_matrix(spec, spec.kpoints[idx], spec.vectors[idx])
        out[idx] = -2.0 * _sum_over_states(E[idx], v, n, 2).imag
    return out


def rammal_wilkinson(spec, n: int, degeneracy_tol: float = 1e-8) -> np.ndarray:
    """M_ij(k) = (1/2) Im <d_i psi, (H_per - E_n) d_j psi>, sum-over-states form.

    Inserting the off-band resolvent expansion of grad psi_n gives
    M_ij = -(1/2) sum_{m != n} Im(v^i_{nm} v^j_{mn}) / (E_n - E_m),
    validated against the finite-difference evaluation (see tests).
    """
    E = spec.energies
    _check_isolated(E, n, degeneracy_tol)
    gshape = E.shape[:-1]
    d = spec.kpoints.shape[-1]
    out = np.zeros(gshape + (d, d))
    for idx in np.ndindex(*gshape):
        v = velocity_matrix(spec, spec.kpoints[idx], spec.vectors[idx])
        out[idx] = -0.5 * _sum_over_states(E[idx], v, n, 1).imag
    return out


def rammal_wilkinson_fd(spec, n: int, k, h: float = 1e-4) -> np.ndarray:
    """Finite-difference oracle for M via phase-aligned eigenvectors.

    M_ij = (1/2) Im <d_i psi, (H - E) d_j psi>; the gauge (parallel) component
    of d psi is annihilated by (H - E), so simple phase alignment suffices.
    """
    k = np.atleast_1d(np.asarray(k, float))
    d = k.size
    E0, V0 = spec.solve_at(k)
    u0 = V0[:, n]
    dpsi = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        _, Vp = spec.solve_at(k + e)
        _, Vm = spec.solve_at(k - e)
        up = Vp[:, n]
        um = Vm[:, n]
        up = up * np.exp(-1j * np.angle(np.vdot(u0, up)))
        um = um * np.exp(-1j * np.angle(np.vdot(u0, um)))
        dpsi.append((up - um) / (2 * h))
    H0 = spec.hamiltonian_at(k)
    M = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            M[i, j] = 0.5 * np.imag(
                np.vdot(dpsi[i], (H0 - E0[n] * np.eye(H0.shape[0])) @ dpsi[j]))
    return M


def berry_curvature_plaquette(spec, n: int, plane=(0, 1),
                              degeneracy_tol: float = 1e-8):
    """Gauge-invariant lattice field strength and Chern number on a 2D grid.

    Returns (omega_field, chern): omega_field has shape grid_shape and holds
    the plaquette phase divided by the plaquette area (curvature component
    Omega_{plane}); chern = sum of plaquette phases / 2 pi.
    """
    E = spec.energies
    _check_isolated(E, n, degeneracy_tol)
    gshape = spec.kpoints.shape[:-1]
    if len(gshape) != 2:
        raise ValueError("plaquette method needs a 2D k-grid")
    N1, N2 = gshape
    lat: Lattice = spec.lattice
    u = spec.vectors[..., :, n]                      # (N1, N2, dim)
    a1, a2 = plane

    def site(i1, i2):
        """Band state at (i1, i2) with equivariant continuation past the edge."""
        g = np.zeros(lat.d, dtype=int)
        if i1 >= N1:
            g[a1] += 1
        if i2 >= N2:
            g[a2] += 1
        vec = u[i1 % N1, i2 % N2]
        if np.any(g):
            vec = spec.shift_states(vec[:, None], g)[:, 0]
        return vec

    F = np.zeros((N1, N2))
    for i1 in range(N1):
        for i2 in range(N2):
            u00 = site(i1, i2)
            u10 = site(i1 + 1, i2)
            u11 = site(i1 + 1, i2 + 1)
            u01 = site(i1, i2 + 1)
            loop = (np.vdot(u00, u10) * np.vdot(u10, u11)
                    * np.vdot(u11, u01) * np.vdot(u01, u00))
            if abs(loop) < 1e-8:
                raise RuntimeError(
                    f"plaquette link modulus below 1e-8 at {(i1, i2)}; refine grid")
            F[i1, i2] = -np.angle(loop)
    b1, b2 = lat.dual[a1], lat.dual[a2]
    if lat.d == 2:
        area = abs(b1[0] * b2[1] - b1[1] * b2[0]) / (N1 * N2)
    else:
        area = np.linalg.norm(np.cross(b1, b2)) / (N1 * N2)
    chern = float(F.sum() / (2.0 * np.pi))
    return F / area, chern


def chern_number(spec, n: int, plane=(0, 1)) -> float:
    return berry_curvature_plaquette(spec, n, plane)[1]


# ----------------------------------------------------------------------------
# Berry connection: parallel-transport gauge
# ----------------------------------------------------------------------------

def _transport_line(vectors, closure_shift):
    """Parallel transport along one closed line of states.

    vectors: (N, dim) states; closure_shift(vec) embeds the first state at the
    far boundary.  Returns (gauge-fixed vectors with winding distributed,
    total holonomy angle).
    """
    fixed, hol = _transport_raw(vectors, closure_shift)
    return _distribute_winding(fixed, hol), hol


def _transport_raw(vectors, closure_shift):
    """Parallel transport without winding distribution; returns (fixed, hol)."""
    N = vectors.shape[0]
    fixed = np.array(vectors, copy=True)
    for i in range(1, N):
        ov = np.vdot(fixed[i - 1], fixed[i])
        fixed[i] = fixed[i] * (np.conj(ov) / abs(ov))
    w = np.vdot(fixed[N - 1], closure_shift(fixed[0]))
    hol = -np.angle(w)
    return fixed, hol


def _distribute_winding(fixed, hol):
    N = fixed.shape[0]
    phases = np.exp(-1j * hol * np.arange(N) / N)
    return fixed * phases[:, None]


def zak_phase(spec, n: int, axis: int = 0, line_index: int = 0) -> float:
    """Holonomy of band n along a dual-basis line (mod 2 pi)."""
    u = spec.vectors[..., :, n]
    gshape = spec.kpoints.shape[:-1]
    d = len(gshape)
    if d == 1:
        line = u
    else:
        idx = [line_index] * d
        idx[axis] = slice(None)
        line = np.moveaxis(u, axis, 0)[(slice(None),) + tuple(
            line_index for _ in range(d - 1))]
    g = np.zeros(spec.lattice.d, dtype=int)
    g[axis] = 1
    _, hol = _transport_line(line, lambda v: spec.shift_states(v[:, None], g)[:, 0])
    return float(np.mod(hol, 2.0 * np.pi))


def berry_connection(spec, n: int, gauge: str = "parallel-transport",
                     degeneracy_tol: float = 1e-8):
    """Gauge-fixed Berry connection field A_j(k) on the grid; shape (*grid, d).

    Gauge: parallel transport along grid lines of axis 0 (seeded from a
    transported line along the last axis in d >= 2), with each line's
    end-of-line winding distributed uniformly (periodic gauge).
    """
    if gauge != "parallel-transport":
        raise ValueError("only the parallel-transport gauge is implemented")
    E = spec.energies
    _check_isolated(E, n, degeneracy_tol)
    gshape = spec.kpoints.shape[:-1]
    d = len(gshape)
    lat: Lattice = spec.lattice
    u = np.array(spec.vectors[..., :, n], copy=True)

    def shifter(axis):
        g = np.zeros(lat.d, dtype=int)
        g[axis] = 1
        return lambda v: spec.shift_states(v[:, None], g)[:, 0]

    if d == 1:
        u, _ = _transport_line(u, shifter(0))
    elif d == 2:
        seed, _ = _transport_line(u[0, :, :], shifter(1))
        u[0] = seed
        # Transport each column first, then distribute the column holonomies
        # with branch cuts unwrapped across neighbouring columns; a principal
        # value per column would jump by 2 pi and spike the connection.
        hols = np.empty(gshape[1])
        for i2 in range(gshape[1]):
            u[:, i2, :], hols[i2] = _transport_raw(u[:, i2, :], shifter(0))
        hols = np.unwrap(hols)
        for i2 in range(gshape[1]):
            u[:, i2, :] = _distribute_winding(u[:, i2, :], hols[i2])
    else:
        raise ValueError("parallel-transport gauge implemented for d <= 2")

    # A_j by 4th-order Richardson of link phases (gauge now smooth + periodic)
    A = np.zeros(gshape + (d,))
    for ax in range(d):
        dk = np.linalg.norm(lat.dual[ax]) / gshape[ax]
        sh = shifter(ax)

        def link_angle(steps):
            """-arg <u(i), u(i+steps)> with equivariant wrap past the edge."""
            rolled = np.roll(u, -steps, axis=ax)
            idx = [slice(None)] * u.ndim
            idx[ax] = slice(gshape[ax] - steps, gshape[ax])
            block = rolled[tuple(idx)]
            flat = block.reshape(-1, block.shape[-1])
            flat = np.stack([sh(vv) for vv in flat])
            rolled[tuple(idx)] = flat.reshape(block.shape)
            ov = np.einsum("...i,...i->...", np.conj(u), rolled)
            return -np.angle(ov)

        # alpha(i; s) = -arg<u(i), u(i+s)> = A_ax * s * dk + odd error terms;
        # the symmetric combination cancels even orders, Richardson the rest.
        f1 = link_angle(1)
        f2 = link_angle(2)
        alpha_h = (f1 + np.roll(f1, 1, axis=ax)) / (2.0 * dk)
        alpha_2h = (f2 + np.roll(f2, 2, axis=ax)) / (4.0 * dk)
        A[..., ax] = (4.0 * alpha_h - alpha_2h) / 3.0
    return A, u


def interpolate_field(grid_values: np.ndarray, lattice: Lattice,
                      offset: float = 0.5, is_real: bool = True) -> TrigPoly:
    """Trigonometric interpolant of a Gamma*-periodic field sampled on the
    cell-centered k-grid; exact at grid points, analytic derivatives."""
    return fit_periodic_grid(np.asarray(grid_values), lattice.dual,
                             offset=offset, is_real=is_real)


# ----------------------------------------------------------------------------
# synthetic two-level model (closed-form spectrum interface)
# ----------------------------------------------------------------------------

_PAULI = np.array([[[0, 1], [1, 0]],
                   [[0, -1j], [1j, 0]],
                   [[1, 0], [0, -1]]], dtype=complex)


@dataclass
class TwoLevelModel:
    """H(k) = d(k).sigma with d(k) 2pi-periodic in reduced coordinates.

    d(k) = (sin k1, sin k2, m - cos k1 - cos k2): |Chern| = 1 of the lower
    band for 0 < |m| < 2, equal to +1 at the default m = -1.  The model is
    exactly periodic, so the equivariant boundary shift is the identity.
    """

    lattice: Lattice
    m: float = -1.0
    kpoints: np.ndarray = None        # type: ignore[assignment]
    energies: np.ndarray = field(default=None)   # type: ignore[assignment]
    vectors: np.ndarray = field(default=None)    # type: ignore[assignment]

    def d_vector(self, k):
        k = np.atleast_1d(np.asarray(k, float))
        t = self.lattice.to_fractional(k, "dual") * 2.0 * np.pi
        return np.array([np.sin(t[0]), np.sin(t[1]),
                         self.m - np.cos(t[0]) - np.cos(t[1])])

    def d_jacobian(self, k):
        """J[j, a] = d d_a / d k_j."""
        k = np.atleast_1d(np.asarray(k, float))
        t = self.lattice.to_fractional(k, "dual") * 2.0 * np.pi
        dt_dk = 2.0 * np.pi * np.linalg.inv(self.lattice.dual)  # t_m = 2pi (k inv(dual))_m
        Jt = np.array([[np.cos(t[0]), 0.0, np.sin(t[0])],
                       [0.0, np.cos(t[1]), np.sin(t[1])]])
        return dt_dk @ Jt

    def hamiltonian_at(self, k):
        return np.einsum("a,aij->ij", self.d_vector(k), _PAULI)

    def solve_at(self, k):
        import scipy.linalg as sla
        return sla.eigh(self.hamiltonian_at(k))

    def dhamiltonian(self, k):
        return np.einsum("ja,amn->jmn", self.d_jacobian(k), _PAULI)

    def shift_states(self, vecs, gstar_int):
        return vecs

    def solve_grid(self, shape, offset: float = 0.5):
        from .bloch import make_kgrid
        self.kpoints = make_kgrid(self.lattice, shape, offset)
        g = self.kpoints.shape[:-1]
        self.energies = np.empty(g + (2,))
        self.vectors = np.empty(g + (2, 2), dtype=complex)
        for idx in np.ndindex(*g):
            w, v = self.solve_at(self.kpoints[idx])
            self.energies[idx] = w
            self.vectors[idx] = v
        return self
