"""Run configuration: TOML text with [model], [noise] and [run] sections."""

import hashlib
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, ValidationError

COMMANDS = ("steady", "evolve", "spectrum", "walls", "wigner", "metastable", "sweep")
GRID_AXES = ("c_e", "K", "phi")


@dataclass(frozen=True)
class ModelSection:
    c_e: float = None
    c_g: float = None
    phi: float = None
    m: int = None
    K: int = None
    nu: float = 1.0
    n_max: int = None
    atom_mix: str = "pure"
    p1: float = 1.0
    p3: float = 0.0

    def atom_amplitudes(self):
        """(c_g, c_e) from whichever amplitudes were given."""
        if self.c_g is None:
            return math.sqrt(1.0 - self.c_e**2), self.c_e
        if self.c_e is None:
            return self.c_g, math.sqrt(1.0 - self.c_g**2)
        return self.c_g, self.c_e


@dataclass(frozen=True)
class NoiseSection:
    kappa: float = 0.0
    n_th: float = 0.0
    gamma1: float = 0.0
    gamma3: float = 0.0
    t_prep: float = 0.0
    tau: float = 1.0
    beam_sigma: float = 0.0
    beam_scheme: str = "gauss"
    beam_order: int = 21
    trajectories: int = 100
    seed: int = None

    @property
    def monte_carlo(self):
        return self.beam_sigma > 0 and self.beam_scheme == "monte-carlo"


@dataclass(frozen=True)
class RunSection:
    command: str = None
    k: tuple = (1000,)
    times: tuple = ()
    initial: str = "vacuum"
    alpha: float = 0.0
    state: str = "plus"
    count: int = 3
    re_bounds: tuple = (-4.0, 4.0)
    im_bounds: tuple = (-4.0, 4.0)
    resolution: int = 81
    eigenvalues: int = 6
    output: str = None
    grid: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    run: RunSection = field(default_factory=RunSection)

    def canonical(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def grid_axis(self, name):
        for axis, values in self.run.grid:
            if axis == name:
                return values
        return None

    def override(self, seed=None, n_max=None, command=None):
        config = self
        if seed is not None:
            config = replace(config, noise=replace(config.noise, seed=seed))
        if n_max is not None:
            config = replace(config, model=replace(config.model, n_max=n_max))
        if command is not None:
            config = replace(config, run=replace(config.run, command=command))
        return validate(config)


_TYPES = {
    "c_e": float, "c_g": float, "phi": float, "m": int, "K": int, "nu": float, "n_max": int,
    "atom_mix": str, "p1": float, "p3": float,
    "kappa": float, "n_th": float, "gamma1": float, "gamma3": float, "t_prep": float, "tau": float,
    "beam_sigma": float, "beam_scheme": str, "beam_order": int, "trajectories": int, "seed": int,
    "command": str, "initial": str, "alpha": float, "state": str, "count": int, "resolution": int,
    "eigenvalues": int, "output": str,
}
_LIST_KEYS = {"k": int, "times": float, "re_bounds": float, "im_bounds": float}


def _coerce(name, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise ValidationError(name, f"expected {kind.__name__}, got {value!r}")


def _grid_values(name, spec):
    """A list of values or a {start, stop, step} table with inclusive stop."""
    if isinstance(spec, list):
        return tuple(_coerce(name, value, int if name == "K" else float) for value in spec)
    if isinstance(spec, dict):
        if set(spec) != {"start", "stop", "step"}:
            raise ValidationError(name, "range needs exactly start, stop, step")
        start, stop, step = (spec[key] for key in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ValidationError(name, "range needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if name == "K":
            if not all(isinstance(v, int) for v in (start, stop, step)):
                raise ValidationError(name, "K range must be integer")
            return tuple(start + index * step for index in range(count))
        return tuple(round(start + index * step, 12) for index in range(count))
    raise ValidationError(name, "grid axis must be a list or a {start, stop, step} table")


def _section(cls, name, table):
    if not isinstance(table, dict):
        raise ValidationError(name, "must be a table")
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in table.items():
        qualified = f"{name}.{key}"
        if key == "grid" and cls is RunSection:
            if not isinstance(value, dict):
                raise ValidationError(qualified, "must be a table")
            unknown = set(value) - set(GRID_AXES)
            if unknown:
                raise ValidationError(f"{qualified}.{sorted(unknown)[0]}", "unknown grid axis")
            values["grid"] = tuple((axis, _grid_values(f"{qualified}.{axis}", value[axis])) for axis in GRID_AXES if axis in value)
        elif key not in known:
            raise ValidationError(qualified, "unknown key")
        elif key in _LIST_KEYS:
            if not isinstance(value, list):
                raise ValidationError(qualified, "expected a list")
            values[key] = tuple(_coerce(qualified, item, _LIST_KEYS[key]) for item in value)
        else:
            values[key] = _coerce(qualified, value, _TYPES[key])
    return cls(**values)


def parse_config(text):
    """Parse and validate configuration text; raises ParseError or ValidationError."""
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as error:
        line = getattr(error, "lineno", None)
        column = getattr(error, "colno", None)
        if line is None:
            found = re.search(r"line (\d+), column (\d+)", str(error))
            line, column = (int(found.group(1)), int(found.group(2))) if found else (1, 1)
        raise ParseError(str(error).split(" (at line")[0], line, column) from error
    unknown = set(document) - {"model", "noise", "run"}
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown section")
    config = RunConfig(
        _section(ModelSection, "model", document.get("model", {})),
        _section(NoiseSection, "noise", document.get("noise", {})),
        _section(RunSection, "run", document.get("run", {})),
    )
    return validate(config)


def validate(config):
    model, noise, run = config.model, config.noise, config.run
    grid_axes = {axis for axis, _ in run.grid}
    coupling_by_wall = model.m is not None or model.K is not None or "K" in grid_axes
    coupling_by_phi = model.phi is not None or "phi" in grid_axes
    if coupling_by_wall and coupling_by_phi:
        raise ValidationError("model.phi", "give either phi or the wall (m, K), not both")
    if not (coupling_by_wall or coupling_by_phi) and run.command not in ("walls", None):
        raise ValidationError("model.phi", "one of phi or the wall (m, K) is required")
    if run.command == "sweep" and "phi" in grid_axes and model.phi is not None:
        raise ValidationError("model.phi", "phi is swept by run.grid.phi")
    if run.command not in ("sweep", "walls", None) and model.phi is None and model.m is None:
        raise ValidationError("model.phi", "grid axes apply only to sweep; set phi or (m, K)")
    if coupling_by_wall and run.command != "walls":
        if model.m is None:
            raise ValidationError("model.m", "wall position required with K")
        if model.K is None and ("K" not in grid_axes or run.command not in ("sweep", None)):
            raise ValidationError("model.K", "wall index required with m")
    if model.m is not None and model.m < 0:
        raise ValidationError("model.m", "must be non-negative")
    if model.K == 0 or any(k == 0 for k in (config.grid_axis("K") or ())):
        raise ValidationError("model.K", "must be non-zero")
    for amplitude in ("c_e", "c_g"):
        value = getattr(model, amplitude)
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValidationError(f"model.{amplitude}", "amplitude must lie in [0, 1]")
    if model.c_e is not None and model.c_g is not None and abs(model.c_e**2 + model.c_g**2 - 1.0) > 1e-12:
        raise ValidationError("model.c_g", "c_g^2 + c_e^2 must equal 1")
    if model.atom_mix not in ("pure", "thermal"):
        raise ValidationError("model.atom_mix", "must be 'pure' or 'thermal'")
    if model.atom_mix == "pure" and model.c_e is None and model.c_g is None:
        if run.command not in ("walls", "sweep", None) or (run.command == "sweep" and "c_e" not in grid_axes):
            raise ValidationError("model.c_e", "atom amplitude required")
    if model.atom_mix == "thermal" and (min(model.p1, model.p3) < 0 or abs(model.p1 + model.p3 - 1) > 1e-12):
        raise ValidationError("model.p1", "thermal populations must be non-negative and sum to 1")
    if model.n_max is not None and model.n_max < 1:
        raise ValidationError("model.n_max", "must be positive")
    if model.nu <= 0:
        raise ValidationError("model.nu", "must be positive")
    for name in ("kappa", "n_th", "gamma1", "gamma3", "t_prep", "tau", "beam_sigma"):
        if getattr(noise, name) < 0:
            raise ValidationError(f"noise.{name}", "must be non-negative")
    if noise.beam_scheme not in ("gauss", "monte-carlo"):
        raise ValidationError("noise.beam_scheme", "must be 'gauss' or 'monte-carlo'")
    if noise.monte_carlo and noise.seed is None:
        raise ValidationError("noise.seed", "required when Monte Carlo sampling is enabled")
    if noise.seed is not None and not 0 <= noise.seed < 2**64:
        raise ValidationError("noise.seed", "must be a 64-bit unsigned integer")
    if run.command is not None and run.command not in COMMANDS:
        raise ValidationError("run.command", f"must be one of {', '.join(COMMANDS)}")
    if any(k < 0 for k in run.k) or list(run.k) != sorted(run.k):
        raise ValidationError("run.k", "atom counts must be ascending and non-negative")
    if any(t < 0 for t in run.times) or list(run.times) != sorted(run.times):
        raise ValidationError("run.times", "times must be ascending and non-negative")
    if run.initial not in ("vacuum", "coherent", "one"):
        raise ValidationError("run.initial", "must be 'vacuum', 'one' or 'coherent'")
    if run.state not in ("plus", "minus"):
        raise ValidationError("run.state", "must be 'plus' or 'minus'")
    if run.resolution < 2:
        raise ValidationError("run.resolution", "must be at least 2")
    return config
