"""Run configuration: INI-style ``key = value`` text with section headers.

Example::

    [grid]
    dim = 1
    n = 64
    extent = 1.0
    bc = dirichlet

    [model]
    a = -0.3
    b = 1
    c = 1
    L = 0.01
    M = 1
    A0 = auto

    [time]
    dt = 1e-3
    T = 0.5

    [initial]
    kind = uniaxial-bump
    s = 0.5
    center = 0.5
    width = 0.3
    director = x

Only ``model.a``, ``model.b``, ``model.c``, ``time.dt`` and ``time.T`` are
required; see :data:`DEFAULTS` for the rest.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import MISSING, dataclass, fields, replace
from typing import Optional

import numpy as np

from .errors import ConfigParseError, ConfigValidationError, NonpositiveRadicand
from .grid import BCS, Grid, read_field
from .initial import director_vector, random_smooth, uniaxial_bump
from .stepper import DEFAULT_TOL, SchemeState
from .tensor import ModelParams, default_A0, radicand

INITIAL_KINDS = ("zero", "uniaxial-bump", "random-seeded", "file")

# section -> key -> (attribute, kind)
SCHEMA = {
    "grid": {"dim": ("dim", "int"), "n": ("n", "ints"), "extent": ("extent", "floats"), "bc": ("bc", "str")},
    "model": {
        "a": ("a", "float"),
        "b": ("b", "float"),
        "c": ("c", "float"),
        "L": ("L", "float"),
        "M": ("M", "float"),
        "A0": ("A0", "auto_float"),
    },
    "time": {"dt": ("dt", "float"), "T": ("T", "float")},
    "initial": {
        "kind": ("ic_kind", "str"),
        "s": ("ic_s", "float"),
        "center": ("ic_center", "floats"),
        "width": ("ic_width", "float"),
        "director": ("ic_director", "str"),
        "seed": ("ic_seed", "int"),
        "amplitude": ("ic_amplitude", "float"),
        "path": ("ic_path", "str"),
    },
    "solver": {
        "tol": ("cg_tol", "float"),
        "max_iter": ("cg_max_iter", "int"),
        "abort_on_r_loss": ("abort_on_r_loss", "bool"),
    },
    "output": {"stride": ("stride", "int"), "dir": ("out", "str")},
}
REQUIRED = [("model", "a"), ("model", "b"), ("model", "c"), ("time", "dt"), ("time", "T")]


@dataclass(frozen=True)
class RunConfig:
    a: float
    b: float
    c: float
    dt: float
    T: float
    dim: int = 1
    n: tuple = (64,)
    extent: tuple = (1.0,)
    bc: str = "dirichlet"
    L: float = 1.0
    M: float = 1.0
    A0: Optional[float] = None  # None = choose from the initial data
    ic_kind: str = "uniaxial-bump"
    ic_s: float = 0.5
    ic_center: tuple = (0.5,)
    ic_width: float = 0.3
    ic_director: str = "x"
    ic_seed: int = 0
    ic_amplitude: float = 0.1
    ic_path: str = ""
    cg_tol: float = DEFAULT_TOL
    cg_max_iter: int = 0  # 0 = 10 * node count
    abort_on_r_loss: bool = False
    stride: int = 1
    out: str = ""

    def violations(self):
        bad = []

        def need(ok, name, msg):
            if not ok:
                bad.append((name, msg))

        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if any(isinstance(x, float) and not math.isfinite(x) for x in vals):
                bad.append((f.name, "must be finite"))
        need(self.dim in (1, 2, 3), "dim", "must be 1, 2 or 3")
        need(len(self.n) in (1, self.dim), "n", "give one value or one per axis")
        need(all(k >= 2 for k in self.n), "n", "need at least 2 cells per axis")
        need(len(self.extent) in (1, self.dim), "extent", "give one value or one per axis")
        need(all(e > 0 for e in self.extent), "extent", "must be > 0")
        need(self.bc in BCS, "bc", f"must be one of {', '.join(BCS)}")
        need(self.c > 0, "c", "bulk potential must be bounded below (c > 0)")
        need(self.L > 0, "L", "must be > 0")
        need(self.M > 0, "M", "must be > 0")
        need(self.A0 is None or self.A0 >= 0, "A0", "must be >= 0 or auto")
        need(self.dt > 0, "dt", "must be > 0")
        need(self.T >= self.dt, "T", "must be >= dt")
        need(self.stride >= 1, "stride", "must be >= 1")
        need(self.cg_tol > 0, "tol", "must be > 0")
        need(self.cg_max_iter >= 0, "max_iter", "must be >= 0")
        need(self.ic_kind in INITIAL_KINDS, "kind", f"must be one of {', '.join(INITIAL_KINDS)}")
        need(self.ic_width > 0, "width", "must be > 0")
        need(self.ic_amplitude >= 0, "amplitude", "must be >= 0")
        need(len(self.ic_center) in (1, self.dim), "center", "give one value or one per axis")
        need(self.ic_kind != "file" or bool(self.ic_path), "path", "required for kind = file")
        try:
            director_vector(self.ic_director)
        except ValueError as exc:
            bad.append(("director", str(exc)))
        return bad

    def validate(self) -> "RunConfig":
        bad = self.violations()
        if bad:
            raise ConfigValidationError(bad)
        return self

    def grid(self) -> Grid:
        return Grid.uniform(self.n, self.extent, self.bc, dim=self.dim)

    def params(self, A0: float) -> ModelParams:
        return ModelParams(self.a, self.b, self.c, self.L, self.M, A0)

    @property
    def steps(self) -> int:
        return int(math.floor(self.T / self.dt + 1e-9))

    @property
    def max_iter(self):
        return self.cg_max_iter or None


DEFAULTS = {f.name: f.default for f in fields(RunConfig) if f.default is not MISSING}


def _line_of(text, section, key=None):
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            sec = m.group(1).strip()
            if key is None and sec == section:
                return i
        elif key is not None and sec == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _convert(kind, raw):
    raw = raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "auto_float":
        return None if raw.lower() == "auto" else float(raw)
    if kind == "ints":
        return tuple(int(v) for v in raw.split(","))
    if kind == "floats":
        return tuple(float(v) for v in raw.split(","))
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises on the first syntax error, or with every violated invariant."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("key outside any [section]", line=exc.lineno) from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigParseError(f"duplicate key {exc.option!r}", line=exc.lineno, field=exc.option) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigParseError(f"duplicate section {exc.section!r}", line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError("malformed line", line=line) from exc

    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigParseError(f"unknown section [{section}]", line=_line_of(text, section))
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigParseError(
                    f"unknown key in [{section}]", line=_line_of(text, section, key), field=key
                )
            attr, kind = SCHEMA[section][key]
            try:
                values[attr] = _convert(kind, raw)
            except ValueError as exc:
                raise ConfigParseError(
                    f"cannot read {raw!r} as {kind}", line=_line_of(text, section, key), field=key
                ) from exc
    missing = [(k, "required") for s, k in REQUIRED if not cp.has_option(s, k)]
    if missing:
        raise ConfigValidationError(missing)
    return RunConfig(**values).validate()


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    out = []
    for section, keys in SCHEMA.items():
        out.append(f"[{section}]")
        for key, (attr, _) in keys.items():
            out.append(f"{key} = {_fmt(getattr(cfg, attr))}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def initial_field(cfg: RunConfig, grid: Optional[Grid] = None) -> np.ndarray:
    grid = grid or cfg.grid()
    if cfg.ic_kind == "zero":
        return grid.zeros()
    if cfg.ic_kind == "uniaxial-bump":
        return uniaxial_bump(grid, cfg.ic_s, cfg.ic_center, cfg.ic_width, cfg.ic_director)
    if cfg.ic_kind == "random-seeded":
        return random_smooth(grid, cfg.ic_seed, cfg.ic_amplitude)
    fgrid, Q0 = read_field(cfg.ic_path)
    if fgrid != grid or Q0.ndim != grid.dim + 1:
        raise ValueError(f"{cfg.ic_path}: field grid {fgrid} does not match configured grid {grid}")
    return grid.enforce_bc(Q0)


def make_initial(cfg: RunConfig) -> SchemeState:
    """``Q^0`` from the configured initial condition and ``r^0 = r(Q^0)``.

    ``A0 = auto`` resolves to :func:`default_A0` of the initial data.
    """
    grid = cfg.grid()
    Q0 = initial_field(cfg, grid)
    A0 = cfg.A0
    if A0 is None:
        A0 = default_A0(Q0, cfg.params(1.0))
    params = cfg.params(A0)
    rad = radicand(Q0, params)
    if np.any(~(rad > 0)):
        idx = tuple(int(i) for i in np.unravel_index(np.argmin(rad), rad.shape))
        suggested = default_A0(Q0, params)
        raise NonpositiveRadicand(
            f"2*F_B(Q0) + A0 = {float(rad[idx])!r} <= 0 at node {idx}; "
            f"A0 = {A0!r} is too small, try A0 = {suggested!r}",
            index=idx,
            value=float(rad[idx]),
            suggested_A0=suggested,
        )
    return SchemeState.initial(grid, Q0, params, cfg.dt)


def resolved(cfg: RunConfig, state: SchemeState) -> RunConfig:
    """Copy of ``cfg`` with ``A0`` pinned to the value actually used."""
    return replace(cfg, A0=state.params.A0)
