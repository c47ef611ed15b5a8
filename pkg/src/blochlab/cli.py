"""Command-line driver: config-driven experiments with reproducible artifacts.

Subcommands: bands, geometry, chern, flow, hall, egorov-quantum,
egorov-operator, selftest.  Flags: --config PATH (defaults to the shipped
default configuration), --strict, --out DIR, --threads N.  The default output
root can also be set through the BLOCHLAB_OUT environment variable.

Exit codes: 0 success, 1 configuration/schema violation, 2 failed acceptance
check.  Artifacts are written atomically; identical config + seed produce
byte-identical artifacts (timestamps live only in the manifest).
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .bloch import (ConvergenceError, PeriodicPotential, PlaneWaveBasis,
                    gap_check, make_kgrid, solve_bands, zak_forward,
                    zak_inverse)
from .config import ConfigError, RunConfig, load, validate
from .effective import BandModel, EffectiveModel
from .fields import gaussian_window_fields, preset
from .fitting import fit_order
from .flow import (check_eps_admissible, hall_current_from_spectrum,
                   hamiltonian_value, integrate, theta_det, vector_field)
from .lattice import Lattice

SUBCOMMANDS = ("bands", "geometry", "chern", "flow", "hall",
               "egorov-quantum", "egorov-operator", "selftest")


class CheckFailure(RuntimeError):
    """An acceptance-style check failed during a run (exit code 2)."""


# ----------------------------------------------------------------------------
# artifact plumbing
# ----------------------------------------------------------------------------

def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path: str, obj):
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2,
                                   default=_json_default) + "\n")


def write_csv(path: str, metadata: dict, columns, rows):
    """CSV with '#'-prefixed metadata header lines (units, grid info)."""
    lines = [f"# {k}: {v}" for k, v in sorted(metadata.items())]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float)
                              else str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _resolve_out(args, cfg: RunConfig) -> str:
    return (args.out or cfg.out or os.environ.get("BLOCHLAB_OUT")
            or os.path.join(os.getcwd(), "runs"))


def _manifest(outdir: str, cfg: RunConfig, subcommand: str, checks: list,
              outputs: list, t0: float):
    write_json(os.path.join(outdir, "manifest.json"), {
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "subcommand": subcommand,
        "checks": checks,
        "outputs": sorted(outputs),
        "wall_clock_s": round(time.monotonic() - t0, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    })


# ----------------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------------

def _build_spectrum(cfg: RunConfig, strict: bool):
    lat = Lattice(cfg.lattice)
    pot = PeriodicPotential(lat, dict(cfg.potential))
    basis = PlaneWaveBasis(lat, cfg.cutoff)
    kgrid = make_kgrid(lat, cfg.grid)
    return solve_bands(pot, basis, kgrid, nbands=cfg.band + 2,
                       check_convergence=True, strict=strict)


def _build_fields(cfg: RunConfig, d: int):
    params = {k: v for k, v in cfg.fields["params"].items()}
    if "phi_modes" in params:
        params["phi_modes"] = [(nu, complex(c[0], c[1]))
                               for nu, c in params["phi_modes"]]
    if "A_modes" in params:
        params["A_modes"] = [(j, nu, complex(c[0], c[1]))
                             for j, nu, c in params["A_modes"]]
    return preset(cfg.fields["preset"], d, **params)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_bands(cfg: RunConfig, outdir: str, strict: bool) -> list:
    spec = _build_spectrum(cfg, strict)
    path = os.path.join(outdir, "bands.json")
    write_json(path, {
        "lattice": cfg.lattice,
        "cutoff": cfg.cutoff,
        "grid_shape": list(cfg.grid),
        "n_bands": int(spec.nbands),
        "energies": spec.energies,
        "convergence": spec.convergence,
        "units": {"energy": "hbar^2/(m a^2) = 1", "k": "1/a"},
    })
    return [path]


def cmd_geometry(cfg: RunConfig, outdir: str, strict: bool) -> list:
    from .geometry import berry_curvature, rammal_wilkinson
    if cfg.d != 2:
        raise ConfigError("geometry maps require a 2D lattice")
    spec = _build_spectrum(cfg, strict)
    Om = berry_curvature(spec, cfg.band)
    Mm = rammal_wilkinson(spec, cfg.band)
    rows = []
    for idx in np.ndindex(*spec.grid_shape):
        k = spec.kpoints[idx]
        rows.append((float(k[0]), float(k[1]),
                     float(Om[idx][0, 1]), float(Mm[idx][0, 1])))
    path = os.path.join(outdir, "geometry.csv")
    write_csv(path, {"band": cfg.band, "grid": "x".join(map(str, cfg.grid)),
                     "units": "k in 1/a; omega_12 in a^2; m_12 in energy*a^2"},
              ["k_1", "k_2", "omega_12", "m_12"], rows)
    return [path]


def cmd_chern(cfg: RunConfig, outdir: str, strict: bool) -> list:
    from .geometry import berry_curvature_plaquette
    if cfg.d != 2:
        raise ConfigError("chern requires a 2D lattice")
    spec = _build_spectrum(cfg, strict)
    _, chern = berry_curvature_plaquette(spec, cfg.band)
    info = gap_check(spec, cfg.band)
    path = os.path.join(outdir, "chern.json")
    write_json(path, {"band": cfg.band, "chern": chern, "gap": info})
    return [path]


def cmd_flow(cfg: RunConfig, outdir: str, strict: bool) -> list:
    if cfg.flow is None:
        raise ConfigError("flow subcommand needs a 'flow' config block")
    spec = _build_spectrum(cfg, strict)
    band = BandModel.from_spectrum(spec, cfg.band)
    fields = _build_fields(cfg, cfg.d)
    model = EffectiveModel(band, fields, eps=cfg.eps[0])
    mode = cfg.flow.get("mode", "corrected")
    t_final = float(cfg.flow.get("t_final", 1.0))
    step = float(cfg.flow.get("step", 1e-3))
    every = int(cfg.flow.get("record_every", max(1, int(round(0.05 / step)))))
    z0s = np.asarray(cfg.flow["z0"], dtype=float)
    check_eps_admissible(model, z0s)
    rhs = vector_field(model, mode)
    outputs = []
    d = cfg.d
    cols = (["t"] + [f"r_{j+1}" for j in range(d)]
            + [f"kappa_{j+1}" for j in range(d)] + ["H", "det_theta"])
    for i, z0 in enumerate(z0s):
        times, traj = integrate(rhs, z0, t_final, step, record_every=every)
        H = hamiltonian_value(model, mode, traj)
        det = theta_det(model, traj,
                        0.0 if mode == "leading" else model.eps) \
            if mode != "canonical" else np.ones_like(times)
        rows = [(float(t),) + tuple(float(v) for v in z)
                + (float(h), float(dt))
                for t, z, h, dt in zip(times, traj, H, det)]
        path = os.path.join(outdir, f"flow_{i:03d}.csv")
        write_csv(path, {"mode": mode, "eps": model.eps, "step": step,
                         "units": "t, r in a; kappa in 1/a; H in energy"},
                  cols, rows)
        outputs.append(path)
    return outputs


def cmd_hall(cfg: RunConfig, outdir: str, strict: bool) -> list:
    hall = cfg.hall or {}
    e_field = np.asarray(hall.get("e_field", [0.1, 0.0]), dtype=float)
    model_kind = hall.get("model", "two-level")
    band = int(hall.get("band", cfg.band))
    if model_kind == "two-level":
        from .geometry import TwoLevelModel
        from .lattice import square_lattice
        g = hall.get("grid", [32, 32])
        spec = TwoLevelModel(square_lattice(1.0, 2),
                             m=float(hall.get("m", 1.0))).solve_grid(g)
    else:
        if cfg.d != 2:
            raise ConfigError("hall on a Bloch model requires a 2D lattice")
        spec = _build_spectrum(cfg, strict)
    res = hall_current_from_spectrum(spec, band, e_field)
    path = os.path.join(outdir, "hall.json")
    write_json(path, {"model": model_kind, "band": band,
                      "e_field": e_field, "chern": res["chern"],
                      "current": res["current"]})
    return [path]


def cmd_egorov_operator(cfg: RunConfig, outdir: str, strict: bool) -> list:
    from .weyl import WeylGrid, heisenberg_gap
    if cfg.d != 1:
        raise ConfigError("egorov-operator is a 1D experiment")
    block = cfg.egorov_operator or {}
    n_sites_eps = float(block.get("n_sites_eps", 16.0))
    times = [float(t) for t in block.get("times", [block.get("t", 2.0)])]
    a_lat = float(cfg.lattice[0, 0])
    spec = _build_spectrum(cfg, strict)
    band = BandModel.from_spectrum(spec, cfg.band)
    fields = gaussian_window_fields(
        1, phi_amp=float(block.get("phi_amp", 0.05)),
        phi_width=float(block.get("phi_width", 2.0)),
        A_amp=[float(block.get("a_amp", 0.0375))],
        A_width=float(block.get("a_width", 3.0)))
    aw = float(block.get("observable_width", 2.0))

    def a_fn(k, r):
        return np.cos(a_lat * np.asarray(k)) * np.exp(-np.asarray(r) ** 2 / aw**2)

    n_k = int(block.get("n_fit_k", 64))
    n_r = int(block.get("n_fit_r", 128))
    spu = int(block.get("steps_per_unit", 100))
    mask = float(block.get("mask_frac", 0.25))
    outputs = []
    final_gaps = {"corrected": [], "leading": []}
    for eps in cfg.eps:
        n = int(round(n_sites_eps / eps))
        n += n % 2
        grid = WeylGrid(n, a_lat, eps)
        model = EffectiveModel(band, fields, eps=eps)
        rows = []
        caches = {"corrected": {}, "leading": {}}
        for t in times:
            g_cor = heisenberg_gap(model, a_fn, t, grid, "corrected",
                                   n_k, n_r, spu, mask, caches["corrected"])
            g_lead = heisenberg_gap(model, a_fn, t, grid, "leading",
                                    n_k, n_r, spu, mask, caches["leading"])
            rows.append((float(t), g_cor, g_lead))
        final_gaps["corrected"].append(rows[-1][1])
        final_gaps["leading"].append(rows[-1][2])
        path = os.path.join(outdir, f"egorov_operator_eps_{eps:.6g}.csv")
        write_csv(path, {"eps": eps, "n_sites": n, "mask_frac": mask,
                         "units": "t in hbar/energy; gap is operator 2-norm"},
                  ["t", "gap_corrected", "gap_leading"], rows)
        outputs.append(path)
    summary = {"eps": list(cfg.eps), "gaps": final_gaps}
    if len(cfg.eps) >= 3:
        for key in ("corrected", "leading"):
            slope, intercept, resid = fit_order(cfg.eps, final_gaps[key])
            summary[f"order_{key}"] = slope
            summary[f"residual_{key}"] = resid
    path = os.path.join(outdir, "egorov_operator_summary.json")
    write_json(path, summary)
    outputs.append(path)
    return outputs


def cmd_egorov_quantum(cfg: RunConfig, outdir: str, strict: bool) -> list:
    from .fields import custom_fourier
    from .quantum import MicroGrid, egorov_quantum_gap
    if cfg.d != 1:
        raise ConfigError("egorov-quantum is a 1D experiment")
    block = cfg.egorov_quantum or {}
    a_lat = float(cfg.lattice[0, 0])
    L = float(block.get("l_slow", 8.0))
    n_x = int(block.get("n_x", 16))
    times = [float(t) for t in block.get("times", [1.0])]
    omega = 2.0 * np.pi / L
    phi_amp = float(block.get("phi_amp", 0.3))
    phi_phase = float(block.get("phi_phase", 0.7))
    fields = custom_fourier(1, phi_modes=[([omega],
                                           phi_amp * np.exp(1j * phi_phase))])

    def a_fn(k, r):
        # position-only slow observable: its interband matrix elements are
        # O(eps), which keeps packet-preparation noise below the transport
        # signal; sin has maximal gradient at the packet center r = L/2
        return np.sin(2.0 * np.pi * np.asarray(r) / L) + 0.0 * np.asarray(k)

    lat = Lattice(cfg.lattice)
    pot = PeriodicPotential(lat, dict(cfg.potential))
    basis = PlaneWaveBasis(lat, cfg.cutoff)
    # band interpolants from a fixed moderate k-grid: the fit is
    # machine-precision for analytic bands and keeps the classical-flow cost
    # independent of eps
    n_fit_grid = int(block.get("band_fit_grid", 64))
    spec_fit = solve_bands(pot, basis, make_kgrid(lat, [n_fit_grid]),
                           nbands=cfg.band + 2, check_convergence=False,
                           strict=strict)
    band = BandModel.from_spectrum(spec_fit, cfg.band)
    outputs = []
    final = {"corrected": [], "leading": []}
    for eps in cfg.eps:
        n_cells = int(round(L / (eps * a_lat)))
        if abs(n_cells * eps * a_lat - L) > 1e-9:
            raise ConfigError(f"l_slow must be eps * a * integer (eps={eps})")
        kgrid = make_kgrid(lat, [n_cells])
        spec = solve_bands(pot, basis, kgrid, nbands=cfg.band + 2,
                           check_convergence=False, strict=strict)
        model = EffectiveModel(band, fields, eps=eps)
        grid = MicroGrid(n_cells, n_x, a_lat)
        rows = []
        from .quantum import prepare_band_packet
        psi0 = prepare_band_packet(spec, cfg.band, grid, eps,
                                   k0=float(block.get("k0", 0.3)),
                                   sigma_r=float(block.get("sigma_r", 0.8)))
        for t in times:
            res = egorov_quantum_gap(
                pot, spec, model, grid, a_fn, t,
                dtau=float(block.get("dtau", 0.02)),
                n_k=int(block.get("n_fit_k", 128)),
                n_r=int(block.get("n_fit_r", 256)),
                steps_per_unit=int(block.get("steps_per_unit", 100)),
                band=cfg.band, psi0=psi0)
            rows.append((float(t), res["quantum"], res["corrected"],
                         res["leading"], res["gap_corrected"],
                         res["gap_leading"]))
        final["corrected"].append(rows[-1][4])
        final["leading"].append(rows[-1][5])
        path = os.path.join(outdir, f"egorov_quantum_eps_{eps:.6g}.csv")
        write_csv(path, {"eps": eps, "n_cells": n_cells, "n_x": n_x,
                         "l_slow": L,
                         "units": "t in hbar/energy; expectations dimensionless"},
                  ["t", "quantum", "classical_corrected", "classical_leading",
                   "gap_corrected", "gap_leading"], rows)
        outputs.append(path)
    summary = {"eps": list(cfg.eps), "final_gaps": final}
    if len(cfg.eps) >= 3:
        for key in ("corrected", "leading"):
            slope, intercept, resid = fit_order(cfg.eps, final[key])
            summary[f"order_{key}"] = slope
            summary[f"residual_{key}"] = resid
    path = os.path.join(outdir, "egorov_quantum_summary.json")
    write_json(path, summary)
    outputs.append(path)
    return outputs


def cmd_selftest(cfg: RunConfig, outdir: str, strict: bool) -> list:
    """Fast end-to-end sanity checks; failure exits with code 2."""
    from .weyl import zak_consistency_check
    rng = np.random.default_rng(cfg.seed)
    checks = []

    lat = Lattice(np.eye(1))
    basis = PlaneWaveBasis(lat, 40.0)
    kgrid = make_kgrid(lat, [16])
    free = solve_bands(PeriodicPotential(lat, {}), basis, kgrid)
    worst = 0.0
    for idx in np.ndindex(*free.grid_shape):
        k = free.kpoints[idx]
        exact = np.sort(0.5 * np.sum((k + basis.gcart) ** 2, axis=1))
        worst = max(worst, float(np.max(np.abs(free.energies[idx] - exact))))
    checks.append({"name": "free_particle_bands", "value": worst,
                   "passed": worst < 1e-12})

    psi = rng.normal(size=128) + 1j * rng.normal(size=128)
    z = zak_forward(psi, 16)
    unit = abs(np.linalg.norm(z.amplitudes) - np.linalg.norm(psi))
    rt = float(np.max(np.abs(zak_inverse(z) - psi)))
    checks.append({"name": "zak_unitarity_roundtrip", "value": max(unit, rt),
                   "passed": max(unit, rt) < 1e-10})

    res = zak_consistency_check(16, 8)
    checks.append({"name": "zak_cross_representation", "value": res,
                   "passed": res < 1e-8})

    epses = [0.1, 0.05, 0.025]
    slope, _, _ = fit_order(epses, [3.0 * e**2 for e in epses])
    checks.append({"name": "fit_order_exact_square", "value": slope,
                   "passed": abs(slope - 2.0) < 1e-10})

    path = os.path.join(outdir, "selftest.json")
    write_json(path, {"checks": checks})
    if not all(c["passed"] for c in checks):
        raise CheckFailure("selftest failed: "
                           + ", ".join(c["name"] for c in checks
                                       if not c["passed"]))
    return [path]


_DISPATCH = {
    "bands": cmd_bands,
    "geometry": cmd_geometry,
    "chern": cmd_chern,
    "flow": cmd_flow,
    "hall": cmd_hall,
    "egorov-operator": cmd_egorov_operator,
    "egorov-quantum": cmd_egorov_quantum,
    "selftest": cmd_selftest,
}


def _default_config_path() -> str:
    return str(importlib.resources.files("blochlab").joinpath(
        "data/default_config.json"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blochlab",
        description="Band-structure, Berry-geometry and semiclassical "
                    "transport experiments driven by a JSON run config.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None,
                        help="run configuration file (JSON)")
    parser.add_argument("--strict", action="store_true",
                        help="escalate convergence warnings to errors")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/FFT thread budget (best effort)")
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    t0 = time.monotonic()
    try:
        cfg = load(args.config or _default_config_path())
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    outdir = _resolve_out(args, cfg)
    strict = args.strict or cfg.strict
    checks = []
    try:
        outputs = _DISPATCH[args.subcommand](cfg, outdir, strict)
        checks.append({"name": args.subcommand, "passed": True})
        _manifest(outdir, cfg, args.subcommand, checks, outputs, t0)
        return 0
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        checks.append({"name": args.subcommand, "passed": False,
                       "detail": str(exc)})
        _manifest(outdir, cfg, args.subcommand, checks, [], t0)
        return 2
    except (ConfigError, ConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
