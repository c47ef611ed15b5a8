"""Single-band effective Hamiltonian symbols with slowly varying fields.

`BandModel` packages the periodic band data E(k), Berry connection A_b(k),
curvature Omega(k) and magnetic moment M(k) as smooth interpolants with
analytic derivatives.  `EffectiveModel` combines a band with external
electromagnetic potentials (phi, A) at adiabatic parameter eps and exposes:

  h0(k, r)      = E(kappa) + phi(r),              kappa = k - A(r)
  h1(k, r)      = -F(k, r) . A_b(kappa) - B(r) : M(kappa)
  h_cl          = h0 + eps * h1
  H_sc(kappa,r) = E(kappa) + phi(r) - eps * B(r) : M(kappa)

with F the Lorentz force at velocity grad E(kappa) and X : Y = sum_ij X_ij Y_ij
(both factors antisymmetric).  All gradients are analytic (chain rule through
kappa), and the near-identity canonical change of charts

  T_eps(k, r) = (k + eps * A_b(kappa) . grad A(r),  r + eps * A_b(kappa))

is provided with a fixed-point inverse.  Points are batched with shape (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .fields import ExternalFields
from .lattice import Lattice
from .series import TrigPoly, zero_field


@dataclass(frozen=True)
class BandModel:
    """Smooth periodic band data; components expose value/grad/hess."""

    lattice: Lattice
    energy: object                       # E(k)
    connection: tuple                    # d components A_b,j(k)
    curvature: Optional[tuple] = None    # d*d components, row-major Omega_ij
    moment: Optional[tuple] = None       # d*d components, row-major M_ij

    def __post_init__(self):
        d = self.lattice.d
        if len(self.connection) != d:
            raise ValueError("connection needs one component per dimension")
        for name in ("curvature", "moment"):
            val = getattr(self, name)
            if val is None:
                object.__setattr__(self, name, tuple(zero_field(d)
                                                     for _ in range(d * d)))
            elif len(val) != d * d:
                raise ValueError(f"{name} needs d*d row-major components")

    @property
    def d(self) -> int:
        return self.lattice.d

    # --- band dispersion -----------------------------------------------
    def E(self, k):
        return self.energy.value(k)

    def gradE(self, k):
        return self.energy.grad(k)

    def hessE(self, k):
        return self.energy.hess(k)

    # --- geometric fields ------------------------------------------------
    def A(self, k):
        return np.stack([c.value(k) for c in self.connection], axis=-1)

    def jacA(self, k):
        """jacA[..., i, j] = d A_b,j / d k_i."""
        return np.stack([c.grad(k) for c in self.connection], axis=-1)

    def _matrix(self, comps, k):
        d = self.d
        vals = [c.value(k) for c in comps]
        out = np.stack(vals, axis=-1)
        return out.reshape(out.shape[:-1] + (d, d))

    def Omega(self, k):
        return self._matrix(self.curvature, k)

    def M(self, k):
        return self._matrix(self.moment, k)

    def gradM(self, k):
        """gradM[..., l, i, j] = d M_ij / d k_l."""
        d = self.d
        grads = [c.grad(k) for c in self.moment]        # each (..., d)
        out = np.stack(grads, axis=-1)                  # (..., l, i*d+j)
        return out.reshape(out.shape[:-1] + (d, d))

    @classmethod
    def from_spectrum(cls, spec, n: int, offset: float = 0.5) -> "BandModel":
        """Fit interpolants to band n of a solved spectrum grid."""
        from .geometry import (berry_connection, berry_curvature,
                               interpolate_field, rammal_wilkinson)
        lat = spec.lattice
        d = lat.d
        energy = interpolate_field(spec.energies[..., n], lat, offset)
        Agrid, _ = berry_connection(spec, n)
        connection = tuple(interpolate_field(Agrid[..., j], lat, offset)
                           for j in range(d))
        curvature = moment = None
        if d >= 2:
            Om = berry_curvature(spec, n)
            Mm = rammal_wilkinson(spec, n)
            curvature = tuple(interpolate_field(Om[..., i, j], lat, offset)
                              for i in range(d) for j in range(d))
            moment = tuple(interpolate_field(Mm[..., i, j], lat, offset)
                           for i in range(d) for j in range(d))
        return cls(lattice=lat, energy=energy, connection=connection,
                   curvature=curvature, moment=moment)


@dataclass(frozen=True)
class EffectiveModel:
    """Band + external fields + adiabatic parameter."""

    band: BandModel
    fields: ExternalFields
    eps: float = 0.0

    def __post_init__(self):
        if self.band.d != self.fields.d:
            raise ValueError("band and field dimensions differ")

    @property
    def d(self) -> int:
        return self.band.d

    def with_eps(self, eps: float) -> "EffectiveModel":
        return replace(self, eps=float(eps))

    # --- charts -----------------------------------------------------------
    def kappa(self, k, r):
        return np.asarray(k, float) - self.fields.A(np.asarray(r, float))

    def to_canonical(self, kappa, r):
        return np.asarray(kappa, float) + self.fields.A(np.asarray(r, float)), \
            np.asarray(r, float)

    # --- principal symbol ---------------------------------------------------
    def h0(self, k, r):
        return self.band.E(self.kappa(k, r)) + self.fields.phi(np.asarray(r, float))

    def grad_h0(self, k, r):
        """(d h0/d k, d h0/d r), each shape (..., d)."""
        r = np.asarray(r, float)
        kap = self.kappa(k, r)
        v = self.band.gradE(kap)
        dk = v
        dr = self.fields.grad_phi(r) - np.einsum("...jb,...b->...j",
                                                 self.fields.jac_A(r), v)
        return dk, dr

    # --- subprincipal symbol ------------------------------------------------
    def h1(self, k, r):
        r = np.asarray(r, float)
        kap = self.kappa(k, r)
        v = self.band.gradE(kap)
        F = self.fields.lorentz_force(r, v)
        Ab = self.band.A(kap)
        BM = np.einsum("...ij,...ij->...", self.fields.B(r), self.band.M(kap))
        return -np.einsum("...j,...j->...", F, Ab) - BM

    def _grad_h1_kappa(self, kap, r):
        """d h1 / d kappa at fixed r; shape (..., d)."""
        B = self.fields.B(r)
        v = self.band.gradE(kap)
        F = self.fields.lorentz_force(r, v)
        Ab = self.band.A(kap)
        hessE = self.band.hessE(kap)
        jacAb = self.band.jacA(kap)
        gradM = self.band.gradM(kap)
        # d F_j / d kappa_l = -sum_i hessE_li B_ij
        term1 = -np.einsum("...li,...ij,...j->...l", hessE, B, Ab)
        term2 = np.einsum("...j,...lj->...l", F, jacAb)
        term3 = np.einsum("...ij,...lij->...l", B, gradM)
        return -(term1 + term2 + term3)

    def grad_h1(self, k, r):
        """(d h1/d k, d h1/d r) via the chain rule through kappa = k - A(r)."""
        r = np.asarray(r, float)
        kap = self.kappa(k, r)
        dkap = self._grad_h1_kappa(kap, r)
        v = self.band.gradE(kap)
        Ab = self.band.A(kap)
        Mm = self.band.M(kap)
        gB = self.fields.grad_B(r)            # (..., m, i, j) = d_m B_ij
        # explicit r-dependence: d F_j/d r_m = -hess_phi_mj - sum_i v_i d_m B_ij
        dF = -self.fields.hess_phi(r) - np.einsum("...i,...mij->...mj", v, gB)
        explicit = -(np.einsum("...mj,...j->...m", dF, Ab)
                     + np.einsum("...mij,...ij->...m", gB, Mm))
        dr = explicit - np.einsum("...ml,...l->...m", self.fields.jac_A(r), dkap)
        return dkap, dr

    # --- corrected canonical symbol ------------------------------------------
    def h_cl(self, k, r):
        return self.h0(k, r) + self.eps * self.h1(k, r)

    def grad_h_cl(self, k, r):
        dk0, dr0 = self.grad_h0(k, r)
        dk1, dr1 = self.grad_h1(k, r)
        return dk0 + self.eps * dk1, dr0 + self.eps * dr1

    # --- semiclassical Hamiltonian in kinetic variables -----------------------
    def H_sc(self, kappa, r):
        kappa = np.asarray(kappa, float)
        r = np.asarray(r, float)
        BM = np.einsum("...ij,...ij->...", self.fields.B(r), self.band.M(kappa))
        return self.band.E(kappa) + self.fields.phi(r) - self.eps * BM

    def grad_H_sc(self, kappa, r):
        """(d H_sc/d kappa, d H_sc/d r), each (..., d)."""
        kappa = np.asarray(kappa, float)
        r = np.asarray(r, float)
        B = self.fields.B(r)
        dk = self.band.gradE(kappa) - self.eps * np.einsum(
            "...ij,...lij->...l", B, self.band.gradM(kappa))
        dr = self.fields.grad_phi(r) - self.eps * np.einsum(
            "...mij,...ij->...m", self.fields.grad_B(r), self.band.M(kappa))
        return dk, dr

    # --- near-identity change of charts ---------------------------------------
    def map_T(self, k, r):
        """T_eps(k, r) = (k + eps A_b(kappa).gradA(r), r + eps A_b(kappa))."""
        k = np.asarray(k, float)
        r = np.asarray(r, float)
        Ab = self.band.A(self.kappa(k, r))
        knew = k + self.eps * np.einsum("...jm,...m->...j",
                                        self.fields.jac_A(r), Ab)
        return knew, r + self.eps * Ab

    def map_T_inverse(self, kp, rp, tol: float = 1e-13, maxiter: int = 200):
        """Fixed-point inverse of T_eps (contraction for admissible eps)."""
        kp = np.asarray(kp, float)
        rp = np.asarray(rp, float)
        k, r = kp.copy(), rp.copy()
        for _ in range(maxiter):
            Ab = self.band.A(self.kappa(k, r))
            knew = kp - self.eps * np.einsum("...jm,...m->...j",
                                             self.fields.jac_A(r), Ab)
            rnew = rp - self.eps * Ab
            delta = max(np.max(np.abs(knew - k)), np.max(np.abs(rnew - r)))
            k, r = knew, rnew
            if delta < tol:
                return k, r
        raise RuntimeError("chart inversion did not converge; eps too large?")

    def corrected_kinetic_from_canonical(self, k, r):
        """Canonical (k, r) -> corrected kinetic variables (v, q):
        (p, q) = T_eps(k, r), v = p - A(q)."""
        p, q = self.map_T(k, r)
        return p - self.fields.A(q), q

    def canonical_from_corrected_kinetic(self, v, q):
        p = np.asarray(v, float) + self.fields.A(np.asarray(q, float))
        return self.map_T_inverse(p, q)
