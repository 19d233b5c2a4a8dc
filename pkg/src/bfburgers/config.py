"""Flat ``section.key = value`` run configuration.

Grammar: one assignment per line, ``#`` starts a comment, blank lines are
ignored.  Keys are ``section.name``; values are kept as text until
:func:`build_run_config` types and validates them.  Lists are comma
separated.  A ``meta.json`` written by a run is accepted in place of a
config file (its ``config`` block holds the same flat mapping).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional


class ConfigError(ValueError):
    """Bad or missing configuration; carries the key and source line when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


def parse_config_text(text: str) -> tuple:
    """Return ``(values, lines)``: key -> raw string and key -> line number."""
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", line=no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key.count(".") != 1 or not all(key.split(".")):
            raise ConfigError("keys must look like section.name", key=key, line=no)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=no)
        values[key] = value
        lines[key] = no
    return values, lines


def load_config(path) -> tuple:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.endswith(".json"):
        try:
            meta = json.loads(text)
            block = meta["config"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError(f"{path} is not a run metadata file with a 'config' block") from None
        return {str(k): str(v) for k, v in block.items()}, {}
    return parse_config_text(text)


# {{{ typed access

class _Reader:
    def __init__(self, values, lines):
        self.values = values
        self.lines = lines
        self.seen = set()

    def _err(self, key, msg):
        return ConfigError(msg, key=key, line=self.lines.get(key))

    def has(self, key):
        return key in self.values

    def raw(self, key, default=None, required=False):
        self.seen.add(key)
        if key not in self.values:
            if required:
                raise ConfigError("required key is missing", key=key)
            return default
        return self.values[key]

    def number(self, key, default=None, required=False, lo=None, hi=None, lo_open=False,
               integer=False):
        raw = self.raw(key, None, required)
        if raw is None:
            return default
        try:
            val = int(raw) if integer else float(raw)
        except ValueError:
            raise self._err(key, f"expected {'an integer' if integer else 'a number'}, got {raw!r}") from None
        if not math.isfinite(val):
            raise self._err(key, "value must be finite")
        if lo is not None and (val < lo or (lo_open and val == lo)):
            raise self._err(key, f"value {val} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and val > hi:
            raise self._err(key, f"value {val} must be <= {hi}")
        return val

    def numbers(self, key, default=None, required=False):
        raw = self.raw(key, None, required)
        if raw is None:
            return default
        raw = raw.strip().strip("[]")
        if not raw:
            return []
        try:
            return [float(p) for p in raw.split(",") if p.strip()]
        except ValueError:
            raise self._err(key, f"expected a comma separated list of numbers, got {raw!r}") from None

    def choice(self, key, options, default=None, required=False):
        raw = self.raw(key, None, required)
        if raw is None:
            return default
        if raw not in options:
            raise self._err(key, f"expected one of {sorted(options)}, got {raw!r}")
        return raw

# }}}


DATUM_PARAMS = {
    "step": {"u": 1.0, "x0": 0.0},
    "riemann": {"u_left": 1.0, "u_right": 0.0, "x0": 0.0},
    "bump": {"amplitude": 1.0, "center": 0.0, "width": 1.0},
    "sawtooth": {"n_teeth": 3, "amplitude": 1.0, "period": 1.0, "x0": 0.0},
}
MODEL_NAMES = ("burgers_arctan", "burgers_alg", "zero_flux_beta")


@dataclass
class RunConfig:
    model_name: str
    q_bar: float
    beta: Optional[float]
    datum_preset: Optional[str]
    datum_params: dict
    datum_csv: Optional[str]
    datum_jumps: list
    mollify_h: Optional[float]         # None: no smoothing
    x_left: float
    x_right: float
    n: int
    epsilon: float
    cfl_safety: float
    t_end: float
    snapshot_times: list
    boundary: str
    eps_list: list = field(default_factory=list)
    resolutions: list = field(default_factory=list)
    study_oracle: str = "wave"
    b_minus: float = 1.0
    b_plus: float = 0.0
    wave_xi: tuple = (-5.0, 5.0, 2001)
    verify: dict = field(default_factory=dict)
    svg: bool = True
    raw: dict = field(default_factory=dict)

    @property
    def dx(self):
        return (self.x_right - self.x_left) / (self.n - 1)


def build_run_config(values: dict, lines: Optional[dict] = None, need_grid=True,
                     need_datum=True) -> RunConfig:
    """Type and range-check a flat mapping.  Unknown sections are rejected."""
    lines = lines or {}
    r = _Reader(values, lines)
    known_sections = {"model", "datum", "grid", "solver", "study", "wave", "verify", "output", "selfsim"}
    for key in values:
        if key.split(".")[0] not in known_sections:
            raise ConfigError(f"unknown section (known: {sorted(known_sections)})", key=key,
                              line=lines.get(key))

    name = r.choice("model.name", MODEL_NAMES, required=True)
    q_bar = r.number("model.q_bar", 1.0, lo=0.0, lo_open=True)
    beta = r.number("model.beta", None)
    if name == "zero_flux_beta" and beta is None:
        raise ConfigError("zero_flux_beta needs model.beta", key="model.beta")
    if beta is not None and beta <= 1.0:
        raise ConfigError("tail exponent must exceed 1", key="model.beta", line=lines.get("model.beta"))

    # grid
    if need_grid:
        x_left = r.number("grid.x_left", required=True)
        x_right = r.number("grid.x_right", required=True)
        n = r.number("grid.n", required=True, integer=True, lo=16)
        if not x_right > x_left:
            raise ConfigError("grid.x_right must exceed grid.x_left", key="grid.x_right",
                              line=lines.get("grid.x_right"))
    else:
        x_left = r.number("grid.x_left", -1.0)
        x_right = r.number("grid.x_right", 1.0)
        n = r.number("grid.n", 16, integer=True, lo=16)
    dx = (x_right - x_left) / (n - 1)

    # datum
    preset = r.raw("datum.preset")
    csv_path = r.raw("datum.csv")
    params = {}
    if preset is not None and csv_path is not None:
        raise ConfigError("give either datum.preset or datum.csv, not both", key="datum.csv")
    if preset is not None:
        if preset not in DATUM_PARAMS:
            raise ConfigError(f"unknown preset; choose from {sorted(DATUM_PARAMS)}", key="datum.preset",
                              line=lines.get("datum.preset"))
        for pname, default in DATUM_PARAMS[preset].items():
            val = r.number(f"datum.{pname}", default, integer=isinstance(default, int))
            params[pname] = val
    elif csv_path is None and need_datum:
        raise ConfigError("required key is missing (or give datum.csv)", key="datum.preset")
    jumps = r.numbers("datum.jumps", [])
    mraw = r.raw("datum.mollify", "auto")
    if mraw == "off":
        mollify_h = None
    elif mraw == "auto":
        mollify_h = "auto"
    else:
        mollify_h = r.number("datum.mollify", lo=0.0, lo_open=True)

    # solver
    eraw = r.raw("solver.epsilon", "auto")
    epsilon = "auto" if eraw == "auto" else r.number("solver.epsilon", lo=0.0)
    cfl = r.number("solver.cfl_safety", 0.4, lo=0.0, lo_open=True, hi=1.0)
    t_end = r.number("solver.t_end", 1.0, required=need_grid, lo=0.0, lo_open=True)
    snaps = r.numbers("solver.snapshot_times", None)
    if snaps is None:
        snaps = [0.25 * t_end, 0.5 * t_end, 0.75 * t_end, t_end]
    for t in snaps:
        if not 0 <= t <= t_end:
            raise ConfigError(f"snapshot time {t} outside [0, t_end]", key="solver.snapshot_times",
                              line=lines.get("solver.snapshot_times"))
    boundary = r.choice("solver.boundary", ("outflow", "periodic"), "outflow")

    # studies and oracles
    eps_list = r.numbers("study.eps_list", [])
    resolutions = r.numbers("study.resolutions", [])
    if any(v <= 0 for v in resolutions):
        raise ConfigError("resolutions must be positive grid spacings", key="study.resolutions")
    if eps_list and resolutions and len(eps_list) != len(resolutions):
        raise ConfigError("study.eps_list must match study.resolutions in length", key="study.eps_list")
    if any(v < 0 for v in eps_list):
        raise ConfigError("viscosities must be nonnegative", key="study.eps_list")
    oracle = r.choice("study.oracle", ("wave", "self"), "wave")
    b_minus = r.number("wave.b_minus", 1.0)
    b_plus = r.number("wave.b_plus", 0.0)
    xi = (r.number("wave.xi_min", -5.0), r.number("wave.xi_max", 5.0),
          r.number("wave.n", 2001, integer=True, lo=3))
    if not xi[1] > xi[0]:
        raise ConfigError("wave.xi_max must exceed wave.xi_min", key="wave.xi_max")

    verify = {
        "slope_threshold": r.number("verify.slope_threshold", None, lo=0.0, lo_open=True),
        "hugoniot_tol": r.number("verify.hugoniot_tol", 0.05, lo=0.0, lo_open=True),
        "weak_tol": r.number("verify.weak_tol", 0.25, lo=0.0, lo_open=True),
    }
    for key in ("selfsim.z_hi", "selfsim.z_lo_cells", "selfsim.min_jump_fraction", "selfsim.jump_floor"):
        r.number(key, None, lo=0.0, lo_open=True)
    svg = r.choice("output.svg", ("on", "off"), "on") == "on"

    unknown = sorted(set(values) - r.seen)
    if unknown:
        raise ConfigError("unknown key", key=unknown[0], line=lines.get(unknown[0]))

    if epsilon == "auto":
        epsilon = 2.0 * dx
    return RunConfig(name, q_bar, beta, preset, params, csv_path, jumps, mollify_h,
                     x_left, x_right, int(n), float(epsilon), cfl, t_end, sorted(snaps), boundary,
                     eps_list, resolutions, oracle, b_minus, b_plus, xi, verify, svg, dict(values))


def read_run_config(path, **kw) -> RunConfig:
    values, lines = load_config(path)
    return build_run_config(values, lines, **kw)
