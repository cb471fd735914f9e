"""Experiment configuration: a flat ``key = value`` file with section headers.

Example::

    [experiment]
    kernel = hilbert
    n = 1
    root_center = 0
    root_side = 2
    level = 10
    kappa = 2
    seed = 0

    [family]
    level_offset = 3        ; max_level = level - 3 (or give max_level)
    shifts = true

    [weights]
    powers = -0.5, 0, 0.5, 1   ; every ordered (a, b) pair

    [ladder]
    inner = 1               ; delta, in cell widths
    outer = 2               ; R, in root diameters

    [search]
    starts = 4
    max_iters = 50
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigError
from ..geometry import Cube, CubeFamily
from ..kernels import KernelSpec, TruncationLadder, kernel_from_name


def _floats(text, sep=","):
    return tuple(float(t) for t in str(text).split(sep) if t.strip())


def _points(text, n):
    pts = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            p = tuple(float(t) for t in chunk.split())
            if len(p) != n:
                raise ConfigError(f"point {chunk.strip()!r} does not have {n} coordinates")
            pts.append(p)
    return tuple(pts)


@dataclass
class ExperimentConfig:
    kernel: str = "hilbert"
    alpha: float | None = None
    n: int = 1
    root_center: tuple = (0.0,)
    root_side: float = 2.0
    level: int = 10
    max_level: int | None = None
    level_offset: int = 3
    shifts: bool = True
    powers: tuple = (-0.5, 0.0, 0.5, 1.0)
    pairs: tuple | None = None
    sigma_file: str | None = None
    omega_file: str | None = None
    kappa: int = 2
    ladder_inner: tuple = (1.0,)
    ladder_outer: tuple = (2.0,)
    starts: int = 4
    max_iters: int = 50
    seed: int = 0
    betas: tuple = (0.125, 0.0625)
    test_function: str = "indicator:0:0.5"
    n_lambda: int = 64
    n_random_sets: int = 8
    cancel_centers: tuple = ((0.0,),)
    cancel_radii: tuple = (0.25, 0.5)
    cancel_eps: tuple = (1.0, 2.0)
    poly_trials: int = 8
    strong_tol: float = 1e-10
    strong_max_iters: int = 20000
    refine_levels: tuple = (8, 9, 10)
    threads: int = 1
    out: str = "results"
    source: str | None = field(default=None, compare=False)

    # --- derived objects ----------------------------------------------------

    def kernel_spec(self) -> KernelSpec:
        try:
            return kernel_from_name(self.kernel, self.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def kernel_alpha(self) -> float:
        return self.kernel_spec().alpha

    def root(self) -> Cube:
        return Cube(self.root_center, self.root_side)

    def family_level(self, level=None) -> int:
        level = self.level if level is None else level
        if self.max_level is not None:
            return self.max_level
        return max(level - self.level_offset, 0)

    def family(self, level=None) -> CubeFamily:
        root = self.root()
        if self.shifts:
            return CubeFamily(root, self.family_level(level))
        return CubeFamily.dyadic(root, self.family_level(level))

    def cell_width(self, level=None) -> float:
        level = self.level if level is None else level
        return self.root_side / 2 ** level

    def ladder(self, level=None) -> TruncationLadder:
        w = self.cell_width(level)
        diam = self.root().diameter()
        return TruncationLadder(tuple((a * w, b * diam)
                                      for a in self.ladder_inner for b in self.ladder_outer))

    def dyadic_ladder(self, level=None) -> TruncationLadder:
        return TruncationLadder.dyadic(self.cell_width(level), self.root().diameter())

    def weight_pairs(self) -> list:
        """``(pair_id, a, b)`` for power pairs, or a single file pair."""
        if self.sigma_file or self.omega_file:
            return [("file", None, None)]
        pairs = self.pairs if self.pairs is not None else [
            (a, b) for a in self.powers for b in self.powers]
        return [(f"a={a:g},b={b:g}", a, b) for a, b in pairs]

    def with_level(self, level: int) -> "ExperimentConfig":
        return dataclasses.replace(self, level=int(level))

    def validate(self) -> "ExperimentConfig":
        spec = self.kernel_spec()
        if self.alpha is not None and not np.isclose(self.alpha, spec.alpha):
            raise ConfigError(f"alpha={self.alpha} disagrees with kernel {self.kernel!r}")
        if len(self.root_center) != self.n:
            raise ConfigError("root_center must have n coordinates")
        if self.root_side <= 0:
            raise ConfigError("root_side must be positive")
        if self.level < 0 or self.family_level() > self.level:
            raise ConfigError("need 0 <= max_level <= level")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")
        if self.starts < 1 or self.max_iters < 1:
            raise ConfigError("starts and max_iters must be >= 1")
        if any(not 0 < b < 1 for b in self.betas):
            raise ConfigError("betas must lie in (0, 1)")
        if any(a < 1 for a in self.ladder_inner):
            raise ConfigError("ladder inner cutoffs must be at least one cell width")
        for a, b in (self.pairs or [(p, p) for p in self.powers]):
            if a <= -self.n or b <= -self.n:
                raise ConfigError(f"power exponents must exceed -n, got ({a}, {b})")
        if bool(self.sigma_file) != bool(self.omega_file):
            raise ConfigError("give both sigma_file and omega_file or neither")
        if len(self.refine_levels) < 2:
            raise ConfigError("refine needs at least two levels")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Inverse of :meth:`as_dict` (used to replay a run manifest)."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        vals = {}
        for k, v in data.items():
            if isinstance(v, list):
                v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            vals[k] = v
        return cls(**vals).validate()

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


# key -> (section, field, parser)
_KEYS = {
    ("experiment", "kernel"): ("kernel", str),
    ("experiment", "alpha"): ("alpha", float),
    ("experiment", "n"): ("n", int),
    ("experiment", "root_center"): ("root_center", lambda s: _floats(s, None)),
    ("experiment", "root_side"): ("root_side", float),
    ("experiment", "level"): ("level", int),
    ("experiment", "kappa"): ("kappa", int),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "threads"): ("threads", int),
    ("experiment", "out"): ("out", str),
    ("family", "max_level"): ("max_level", int),
    ("family", "level_offset"): ("level_offset", int),
    ("family", "shifts"): ("shifts", "bool"),
    ("weights", "powers"): ("powers", _floats),
    ("weights", "pairs"): ("pairs", lambda s: tuple(
        tuple(float(v) for v in p.split(":")) for p in s.split(";") if p.strip())),
    ("weights", "sigma_file"): ("sigma_file", str),
    ("weights", "omega_file"): ("omega_file", str),
    ("ladder", "inner"): ("ladder_inner", _floats),
    ("ladder", "outer"): ("ladder_outer", _floats),
    ("search", "starts"): ("starts", int),
    ("search", "max_iters"): ("max_iters", int),
    ("goodlambda", "betas"): ("betas", _floats),
    ("goodlambda", "f"): ("test_function", str),
    ("goodlambda", "n_lambda"): ("n_lambda", int),
    ("goodlambda", "n_random_sets"): ("n_random_sets", int),
    ("cancel", "centers"): ("cancel_centers", None),
    ("cancel", "radii"): ("cancel_radii", _floats),
    ("cancel", "eps"): ("cancel_eps", _floats),
    ("cancel", "poly_trials"): ("poly_trials", int),
    ("strong", "tol"): ("strong_tol", float),
    ("strong", "max_iters"): ("strong_max_iters", int),
    ("refine", "levels"): ("refine_levels", lambda s: tuple(int(v) for v in _floats(s))),
}


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            entry = _KEYS.get((section, key))
            if entry is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            name, conv = entry
            try:
                if conv == "bool":
                    values[name] = parser.getboolean(section, key)
                elif conv is None:
                    values[name] = raw
                else:
                    values[name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None
    n = values.get("n", 1)
    if "cancel_centers" in values:
        values["cancel_centers"] = _points(values["cancel_centers"], n)
    else:
        values["cancel_centers"] = ((0.0,) * n,)
    if "root_center" not in values:
        values["root_center"] = (0.0,) * n
    cfg = ExperimentConfig(source=source, **values)
    base = os.path.dirname(source) if source else ""
    for name in ("sigma_file", "omega_file"):
        path = getattr(cfg, name)
        if path and not os.path.isabs(path):
            setattr(cfg, name, os.path.join(base, path))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=path)
