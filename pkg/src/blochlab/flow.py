"""Semiclassical flows for a magnetic band with Berry-phase corrections.

Kinetic phase-space coordinates z = (r, kappa) carry the field-dependent
symplectic structure

    Theta_{B,eps}(z) = [[ B(r), -I ],
                        [  I,  eps*Omega(kappa) ]]

with the 2-forms B_ij = d_i A_j - d_j A_i and Omega_ij the Berry curvature,
and the equations of motion are Theta zdot = dH with H = H_sc and
dH = (d_r H, d_kappa H).  Written out in components:

    rdot_j     =  d_{kappa_j} H + eps * sum_i kappadot_i Omega_ij
    kappadot_j = -d_{r_j} H     - sum_i rdot_i B_ij

which at eps = 0 is exactly the minimal-coupling flow of E(k-A(r)) + phi(r)
expressed in kinetic momentum.

The "leading" mode freezes eps = 0 in both Theta and H; "corrected" keeps the
full first-order structure; "canonical" integrates the plain symplectic flow
of h_cl(k, r) in canonical coordinates z = (r, k).  Integration is fixed-step
classical Runge-Kutta (RK4), batched over ensembles of initial points.
"""

from __future__ import annotations

import numpy as np

from .effective import EffectiveModel

MODES = ("leading", "corrected", "canonical")


def perp(v):
    """Counterclockwise rotation by pi/2: perp(v) = (-v_2, v_1)."""
    v = np.asarray(v, float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def symplectic_form(B, Omega, eps: float) -> np.ndarray:
    """Theta_{B,eps} for (batched) antisymmetric blocks B, Omega of shape (..., d, d)."""
    B = np.asarray(B, float)
    Omega = np.asarray(Omega, float)
    d = B.shape[-1]
    eye = np.eye(d)
    th = np.zeros(B.shape[:-2] + (2 * d, 2 * d))
    th[..., :d, :d] = B
    th[..., :d, d:] = -eye
    th[..., d:, :d] = eye
    th[..., d:, d:] = eps * Omega
    return th


def _split(z, d):
    z = np.asarray(z, float)
    return z[..., :d], z[..., d:]


def theta_at(model: EffectiveModel, z, eps: float = None) -> np.ndarray:
    """Theta_{B,eps} along kinetic phase-space points z = (r, kappa)."""
    if eps is None:
        eps = model.eps
    r, kappa = _split(z, model.d)
    return symplectic_form(model.fields.B(r), model.band.Omega(kappa), eps)


def theta_det(model: EffectiveModel, z, eps: float = None) -> np.ndarray:
    return np.linalg.det(theta_at(model, z, eps))


def check_eps_admissible(model: EffectiveModel, z_samples,
                         threshold: float = 0.1) -> float:
    """Ensure Theta stays uniformly invertible over sample points.

    Returns the minimal |det Theta|; raises if it drops below `threshold`
    (the first-order structure degenerates and the flow is ill-posed).
    """
    dets = np.abs(theta_det(model, z_samples))
    worst = float(np.min(dets))
    if worst < threshold:
        raise ValueError(
            f"eps={model.eps} inadmissible: min |det Theta| = {worst:.3e}")
    return worst


def vector_field(model: EffectiveModel, mode: str = "corrected"):
    """Right-hand side zdot(z) of the chosen flow; z has shape (..., 2d)."""
    d = model.d
    if mode == "canonical":
        def rhs(z):
            r, k = _split(z, d)
            dk, dr = model.grad_h_cl(k, r)
            return np.concatenate([dk, -dr], axis=-1)
        return rhs
    if mode == "leading":
        kin = model.with_eps(0.0)
    elif mode == "corrected":
        kin = model
    else:
        raise ValueError(f"unknown flow mode {mode!r}; pick one of {MODES}")

    def rhs(z):
        r, kappa = _split(z, d)
        dkap, dr = kin.grad_H_sc(kappa, r)
        dH = np.concatenate([dr, dkap], axis=-1)
        th = symplectic_form(kin.fields.B(r), kin.band.Omega(kappa), kin.eps)
        return np.linalg.solve(th, dH[..., None])[..., 0]
    return rhs


def hamiltonian_value(model: EffectiveModel, mode: str, z):
    """Conserved energy of the chosen flow evaluated along z."""
    d = model.d
    if mode == "canonical":
        r, k = _split(z, d)
        return model.h_cl(k, r)
    kin = model.with_eps(0.0) if mode == "leading" else model
    r, kappa = _split(z, d)
    return kin.H_sc(kappa, r)


def equation_residual(model: EffectiveModel, z) -> float:
    """Max-norm defect of Theta zdot - dH for the corrected flow at z."""
    d = model.d
    r, kappa = _split(z, d)
    zdot = vector_field(model, "corrected")(z)
    dkap, dr = model.grad_H_sc(kappa, r)
    dH = np.concatenate([dr, dkap], axis=-1)
    th = theta_at(model, z)
    defect = np.einsum("...ij,...j->...i", th, zdot) - dH
    return float(np.max(np.abs(defect)))


# ----------------------------------------------------------------------------
# fixed-step RK4
# ----------------------------------------------------------------------------

def rk4_step(rhs, z, h: float):
    k1 = rhs(z)
    k2 = rhs(z + 0.5 * h * k1)
    k3 = rhs(z + 0.5 * h * k2)
    k4 = rhs(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, z0, t_final: float, h: float, record_every: int = 1):
    """Fixed-step RK4 from 0 to t_final; returns (times, trajectory).

    trajectory[m] is the state at times[m]; the final time is hit exactly
    (t_final must be an integer number of steps).  record_every=0 keeps the
    endpoints only.
    """
    z0 = np.asarray(z0, float)
    nsteps = int(round(t_final / h))
    if record_every <= 0:
        record_every = nsteps
    if abs(nsteps * h - t_final) > 1e-12 * max(1.0, abs(t_final)):
        raise ValueError("t_final must be an integer multiple of the step h")
    times = [0.0]
    out = [z0]
    z = z0
    for m in range(1, nsteps + 1):
        z = rk4_step(rhs, z, h)
        if m % record_every == 0 or m == nsteps:
            times.append(m * h)
            out.append(z)
    return np.asarray(times), np.stack(out)


def flow_map(model: EffectiveModel, mode: str, z0, t: float, h: float):
    """Time-t flow of a batch of phase-space points; returns final states."""
    rhs = vector_field(model, mode)
    nsteps = max(1, int(round(t / h)))
    z = np.asarray(z0, float)
    hh = t / nsteps
    for _ in range(nsteps):
        z = rk4_step(rhs, z, hh)
    return z


def transport_observable(model: EffectiveModel, mode: str, a, z_pts,
                         t: float, h: float):
    """Classically transported observable: (a o Phi_t)(z) on a batch of points."""
    zt = flow_map(model, mode, z_pts, t, h)
    r, kv = _split(zt, model.d)
    return a(kv, r)


def liouville_divergence(model: EffectiveModel, mode: str, z,
                         h: float = 1e-5) -> np.ndarray:
    """Central-difference divergence of sqrt(det Theta) * zdot at points z.

    The corrected flow preserves the volume sqrt(det Theta) d z, so this
    weighted divergence vanishes identically (canonical: det = 1).
    """
    z = np.asarray(z, float)
    rhs = vector_field(model, mode)
    if mode == "canonical":
        def w(zz):
            return rhs(zz)
    else:
        eps = 0.0 if mode == "leading" else model.eps

        def w(zz):
            dens = np.sqrt(np.linalg.det(theta_at(model, zz, eps)))
            return dens[..., None] * rhs(zz)

    n = z.shape[-1]
    div = np.zeros(z.shape[:-1])
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        div += (w(z + e)[..., j] - w(z - e)[..., j]) / (2.0 * h)
    return div


# ----------------------------------------------------------------------------
# chart transport (canonical flow seen in corrected kinetic variables)
# ----------------------------------------------------------------------------

def kinetic_from_canonical_flow(model: EffectiveModel, z_canonical):
    """Map canonical states (r, k) to corrected kinetic states (r', kappa')
    through the near-identity chart T_eps followed by k -> k - A(r)."""
    r, k = _split(z_canonical, model.d)
    v, q = model.corrected_kinetic_from_canonical(k, r)
    return np.concatenate([q, v], axis=-1)


def canonical_from_kinetic(model: EffectiveModel, z_kinetic):
    q, v = _split(z_kinetic, model.d)
    k, r = model.canonical_from_corrected_kinetic(v, q)
    return np.concatenate([r, k], axis=-1)


# ----------------------------------------------------------------------------
# Hall response of a filled isolated band (d = 2)
# ----------------------------------------------------------------------------

def hall_current(chern: float, e_field) -> np.ndarray:
    """Drift current of a uniformly filled band: j = -chern * perp(E).

    The anomalous velocity -kdot x Omega integrates to a transverse drift
    proportional to the Chern number; longitudinal response vanishes.
    """
    return -float(chern) * perp(e_field)


def hall_current_from_spectrum(spec, n: int, e_field) -> dict:
    """Hall current of filled band n computed from the curvature integral."""
    from .geometry import berry_curvature_plaquette
    _, chern = berry_curvature_plaquette(spec, n)
    j = hall_current(chern, e_field)
    return {"chern": chern, "current": j}
