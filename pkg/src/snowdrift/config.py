"""key=value run configuration and coefficient values.

Coefficient values accept ``identity``, ``diag(a,b)``, ``constant(v,...)``,
plain numbers, or ``file:<path>`` (one row per triangle for A as
``a11,a12,a22`` and for b as ``b1,b2``; one row per boundary edge or vertex
for ``b_boundary`` and ``c``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .solver import CoefficientSet


class ConfigError(ValueError):
    pass


_CALL = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def parse_kv(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _numbers(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {s!r}") from exc


def _table(path: str, width: int) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"coefficient file {path!r} not found")
    rows = [ln for ln in p.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        arr = np.array([[float(x) for x in r.split(",")] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"non-numeric entry in {path!r}") from exc
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ConfigError(f"{path!r}: expected {width} columns")
    return arr


def _tabulated(arr: np.ndarray, shape_fn):
    def fn(x):
        if len(x) != len(arr):
            raise ConfigError(f"tabulated coefficient has {len(arr)} rows, mesh needs {len(x)}")
        return shape_fn(arr)
    return fn


def parse_matrix(spec: str):
    spec = spec.strip()
    if spec == "identity":
        return np.eye(2)
    if spec.startswith("file:"):
        t = _table(spec[5:], 3)
        return _tabulated(t, lambda a: np.stack([np.stack([a[:, 0], a[:, 1]], -1),
                                                 np.stack([a[:, 1], a[:, 2]], -1)], 1))
    m = _CALL.match(spec)
    if m and m.group(1) == "diag":
        a = _numbers(m.group(2))
        if len(a) != 2:
            raise ConfigError("diag takes two entries")
        return np.diag(a)
    if m and m.group(1) == "constant":
        a = _numbers(m.group(2))
        if len(a) != 3:
            raise ConfigError("constant matrix takes a11,a12,a22")
        return np.array([[a[0], a[1]], [a[1], a[2]]])
    raise ConfigError(f"unknown matrix coefficient {spec!r}")


def parse_vector(spec: str):
    spec = spec.strip()
    if spec.startswith("file:"):
        t = _table(spec[5:], 2)
        return _tabulated(t, lambda a: a)
    m = _CALL.match(spec)
    if m and m.group(1) == "constant":
        a = _numbers(m.group(2))
        if len(a) != 2:
            raise ConfigError("vector constant takes two entries")
        return np.array(a)
    if spec in ("zero", "0"):
        return np.zeros(2)
    raise ConfigError(f"unknown vector coefficient {spec!r}")


def parse_scalar(spec: str):
    spec = spec.strip()
    if spec.startswith("file:"):
        return _table(spec[5:], 1)[:, 0]
    m = _CALL.match(spec)
    if m and m.group(1) == "constant":
        a = _numbers(m.group(2))
        if len(a) != 1:
            raise ConfigError("scalar constant takes one entry")
        return a[0]
    try:
        return float(spec)
    except ValueError as exc:
        raise ConfigError(f"unknown scalar coefficient {spec!r}") from exc


_COEFF_KEYS = {"A", "b", "b_boundary", "c", "c0", "lambda", "gamma1", "gamma2", "delta1", "delta2"}


def parse_coefficients(kv: dict) -> CoefficientSet:
    unknown = set(kv) - _COEFF_KEYS
    if unknown:
        raise ConfigError(f"unknown coefficient keys: {sorted(unknown)}")
    args = {}
    if "A" in kv:
        args["A"] = parse_matrix(kv["A"])
    if "b" in kv:
        args["b"] = parse_vector(kv["b"])
    for k in ("b_boundary", "c"):
        if k in kv:
            args[k] = parse_scalar(kv[k])
    for k in ("c0", "gamma1", "gamma2", "delta1", "delta2"):
        if k in kv:
            args[k] = float(parse_scalar(kv[k]))
    if "lambda" in kv:
        args["lam"] = float(parse_scalar(kv["lambda"]))
    try:
        return CoefficientSet(**args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class RunConfig:
    command: str
    level: int = 2
    method: str = "shell"
    scheme: str = "ie"
    dt: float = 0.01
    T: float = 0.1
    theta: float | None = None
    coeff: str | None = None
    boundary_data: str | None = None
    u0: str = "constant(1)"
    forcing: str = "zero"
    out: str = "out"
    seed: int = 0
    svg: bool = False
    coefficients: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "coefficients"}
        d.update({f"coeff.{k}": v for k, v in self.coefficients.items()})
        return d

    def validate(self) -> None:
        from .geometry import N_MAX

        if self.command not in ("mesh", "extend", "solve", "verify", "export"):
            raise ConfigError(f"unknown command {self.command!r}")
        if not 0 <= self.level <= N_MAX:
            raise ConfigError(f"level {self.level} outside [0, {N_MAX}]")
        if self.command in ("mesh", "extend", "solve") and self.level < 1:
            raise ConfigError("meshes need level >= 1")
        if self.method not in ("shell", "hexagon"):
            raise ConfigError(f"method must be shell or hexagon, got {self.method!r}")
        if self.scheme not in ("ie", "cn"):
            raise ConfigError(f"scheme must be ie or cn, got {self.scheme!r}")
        if self.theta is not None and self.theta not in (0.5, 1.0):
            raise ConfigError("theta must be 1 (ie) or 0.5 (cn)")
        if self.command == "solve" and not (self.dt > 0 and self.T > 0 and self.dt <= self.T):
            raise ConfigError("solve needs 0 < dt <= T")
        if self.command in ("mesh", "extend", "solve", "export") and not self.out:
            raise ConfigError("an output directory is required")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")


_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"command", "coefficients"}
_CASTS = {"level": int, "dt": float, "T": float, "theta": float, "seed": int,
          "svg": lambda s: str(s).lower() in ("1", "true", "yes")}


def build_config(command: str, file_kv: dict, flags: dict) -> RunConfig:
    """Merge a config file and command-line flags (flags win)."""
    cfg = RunConfig(command=command)
    coeffs = {}
    for source in (file_kv, flags):
        for k, v in source.items():
            if v is None:
                continue
            key = k.replace("-", "_")
            if key in _COEFF_KEYS:
                coeffs[key] = v
            elif key in _RUN_KEYS:
                try:
                    setattr(cfg, key, _CASTS.get(key, str)(v) if isinstance(v, str) else v)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {v!r}") from exc
            else:
                raise ConfigError(f"unknown config key {k!r}")
    if cfg.theta is not None:
        cfg.scheme = "ie" if cfg.theta == 1.0 else "cn"
    cfg.coefficients = coeffs
    cfg.validate()
    return cfg
