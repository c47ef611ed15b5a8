"""Run configuration: documented JSON schema, strict validation, hashing.

A run file is a single JSON object.  Unknown keys are rejected anywhere in
the schema; errors carry the config path, the JSON path of the offending key
and, when the key text can be located, its line number.

Top-level schema (defaults in parentheses):

  lattice            d x d row-major direct basis vectors        [required]
  potential          list of [g_1..g_d, re, im] Fourier modes    ([])
  cutoff             plane-wave cutoff |G| <= cutoff              (12.0)
  band               band index n >= 0                            (0)
  grid               k-grid shape, d entries                      ([32]*d)
  fields             {"preset": name, "params": {...}}            (zero)
  eps                list of adiabatic parameters in (0, 0.5]     ([0.1])
  flow               {"t_final", "step", "mode", "z0"}            (optional)
  hall               {"e_field", "model", "m", "grid"}            (optional)
  egorov_operator    {"n_sites_eps", "t", "t_steps", ...}         (optional)
  egorov_quantum     {"l_slow", "n_x", "times", ...}              (optional)
  out                output directory                             (env/default)
  strict             escalate convergence warnings                (false)
  seed               RNG seed for randomized checks               (0)
  threads            BLAS/FFT thread budget                       (0 = leave)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .fields import PRESETS

EPS_MAX = 0.5


class ConfigError(ValueError):
    """Schema violation in a run configuration."""


def _line_of(text: Optional[str], key: str) -> str:
    if not text:
        return ""
    needle = f'"{key}"'
    for ln, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return f" (line {ln})"
    return ""


def _fail(path: str, jpath: str, msg: str, text: Optional[str], key: str = ""):
    raise ConfigError(f"{path}: {jpath}: {msg}{_line_of(text, key)}")


def _check_keys(obj: dict, allowed, path, jpath, text):
    for k in obj:
        if k not in allowed:
            _fail(path, f"{jpath}.{k}", "unknown key", text, k)


def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_FLOW_KEYS = {"t_final", "step", "mode", "z0", "record_every"}
_HALL_KEYS = {"e_field", "model", "m", "grid", "band"}
_EGOP_KEYS = {"n_sites_eps", "t", "observable_width", "phi_amp", "phi_width",
              "a_amp", "a_width", "n_fit_k", "n_fit_r", "steps_per_unit",
              "mask_frac", "times"}
_EGQ_KEYS = {"l_slow", "n_x", "times", "k0", "sigma_r", "dtau",
             "phi_amp", "phi_phase", "n_fit_k", "n_fit_r", "steps_per_unit",
             "band_fit_grid"}
_TOP_KEYS = {"lattice", "potential", "cutoff", "band", "grid", "fields", "eps",
             "flow", "hall", "egorov_operator", "egorov_quantum",
             "out", "strict", "seed", "threads"}
_FIELD_KEYS = {"preset", "params"}


@dataclass(frozen=True)
class RunConfig:
    lattice: np.ndarray
    potential: tuple
    cutoff: float
    band: int
    grid: tuple
    fields: dict
    eps: tuple
    flow: Optional[dict]
    hall: Optional[dict]
    egorov_operator: Optional[dict]
    egorov_quantum: Optional[dict]
    out: Optional[str]
    strict: bool
    seed: int
    threads: int
    raw: dict = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.lattice.shape[0]

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def validate(data: dict, path: str = "<config>",
             text: Optional[str] = None) -> RunConfig:
    if not isinstance(data, dict):
        _fail(path, "$", "top level must be a JSON object", text)
    _check_keys(data, _TOP_KEYS, path, "$", text)

    if "lattice" not in data:
        _fail(path, "$.lattice", "missing required key", text, "lattice")
    lat = data["lattice"]
    try:
        lat = np.asarray(lat, dtype=float)
    except (TypeError, ValueError):
        _fail(path, "$.lattice", "must be a d x d numeric matrix", text, "lattice")
    if lat.ndim != 2 or lat.shape[0] != lat.shape[1] or lat.shape[0] > 3:
        _fail(path, "$.lattice", "must be square with d <= 3", text, "lattice")
    if abs(np.linalg.det(lat)) < 1e-14:
        _fail(path, "$.lattice", "basis vectors are linearly dependent",
              text, "lattice")
    d = lat.shape[0]

    pot = data.get("potential", [])
    if not isinstance(pot, list):
        _fail(path, "$.potential", "must be a list of modes", text, "potential")
    modes = []
    for i, row in enumerate(pot):
        ok = (isinstance(row, list) and len(row) == d + 2
              and all(_number(v) for v in row)
              and all(float(v).is_integer() for v in row[:d]))
        if not ok:
            _fail(path, f"$.potential[{i}]",
                  f"each mode is [g_1..g_{d}, re, im] with integer g",
                  text, "potential")
        modes.append((tuple(int(v) for v in row[:d]),
                      complex(row[d], row[d + 1])))

    cutoff = data.get("cutoff", 12.0)
    if not _number(cutoff) or cutoff <= 0:
        _fail(path, "$.cutoff", "must be a positive number", text, "cutoff")

    band = data.get("band", 0)
    if not isinstance(band, int) or isinstance(band, bool) or band < 0:
        _fail(path, "$.band", "must be a non-negative integer", text, "band")

    grid = data.get("grid", [32] * d)
    if (not isinstance(grid, list) or len(grid) != d
            or not all(isinstance(g, int) and g >= 2 for g in grid)):
        _fail(path, "$.grid", f"must be {d} integers >= 2", text, "grid")

    fields_spec = data.get("fields", {"preset": "zero", "params": {}})
    if not isinstance(fields_spec, dict):
        _fail(path, "$.fields", "must be an object", text, "fields")
    _check_keys(fields_spec, _FIELD_KEYS, path, "$.fields", text)
    preset_name = fields_spec.get("preset", "zero")
    if preset_name not in PRESETS:
        _fail(path, "$.fields.preset", f"must be one of {PRESETS}",
              text, "preset")
    params = fields_spec.get("params", {})
    if not isinstance(params, dict):
        _fail(path, "$.fields.params", "must be an object", text, "params")

    eps = data.get("eps", [0.1])
    if (not isinstance(eps, list) or not eps
            or not all(_number(e) and 0 < e <= EPS_MAX for e in eps)):
        _fail(path, "$.eps", f"must be numbers in (0, {EPS_MAX}]", text, "eps")

    def _sub(name, allowed):
        block = data.get(name)
        if block is None:
            return None
        if not isinstance(block, dict):
            _fail(path, f"$.{name}", "must be an object", text, name)
        _check_keys(block, allowed, path, f"$.{name}", text)
        return block

    flow = _sub("flow", _FLOW_KEYS)
    if flow is not None:
        if flow.get("mode", "corrected") not in ("leading", "corrected",
                                                 "canonical"):
            _fail(path, "$.flow.mode", "must be leading|corrected|canonical",
                  text, "mode")
        if not _number(flow.get("t_final", 1.0)) or flow.get("t_final", 1.0) <= 0:
            _fail(path, "$.flow.t_final", "must be positive", text, "t_final")
        if not _number(flow.get("step", 1e-3)) or flow.get("step", 1e-3) <= 0:
            _fail(path, "$.flow.step", "must be positive", text, "step")
        z0 = flow.get("z0", [])
        if (not isinstance(z0, list) or not z0
                or not all(isinstance(z, list) and len(z) == 2 * d
                           and all(_number(v) for v in z) for z in z0)):
            _fail(path, "$.flow.z0",
                  f"must be a non-empty list of 2d={2*d}-vectors (r, kappa)",
                  text, "z0")

    hall = _sub("hall", _HALL_KEYS)
    if hall is not None:
        ef = hall.get("e_field", [0.1, 0.0])
        if not (isinstance(ef, list) and len(ef) == 2
                and all(_number(v) for v in ef)):
            _fail(path, "$.hall.e_field", "must be a 2-vector", text, "e_field")
        if hall.get("model", "two-level") not in ("two-level", "bloch"):
            _fail(path, "$.hall.model", "must be two-level|bloch", text, "model")

    egop = _sub("egorov_operator", _EGOP_KEYS)
    egq = _sub("egorov_quantum", _EGQ_KEYS)

    out = data.get("out")
    if out is not None and not isinstance(out, str):
        _fail(path, "$.out", "must be a string path", text, "out")
    strict = data.get("strict", False)
    if not isinstance(strict, bool):
        _fail(path, "$.strict", "must be a boolean", text, "strict")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail(path, "$.seed", "must be an integer", text, "seed")
    threads = data.get("threads", 0)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 0:
        _fail(path, "$.threads", "must be a non-negative integer", text,
              "threads")

    return RunConfig(lattice=lat, potential=tuple(modes), cutoff=float(cutoff),
                     band=band, grid=tuple(grid),
                     fields={"preset": preset_name, "params": params},
                     eps=tuple(float(e) for e in eps), flow=flow, hall=hall,
                     egorov_operator=egop, egorov_quantum=egq, out=out,
                     strict=strict, seed=seed, threads=threads, raw=data)


def load(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return validate(data, path=path, text=text)
