"""Run configuration: TOML with a strict schema.

Physics parameters have no defaults; only tolerances and output settings
do.  Unknown keys are rejected by their dotted name.  Every check here runs
before any numerical work starts.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .model import LevelSpec, ProbabilityVector, tail_bound

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

METHODS = ("spectral", "ode", "both")
SPECTRUM_FORMATS = ("json", "csv")


@dataclass(frozen=True)
class SolverConfig:
    bisect_tol: float = 1e-3
    residual_tol: float = 1e-11
    newton_max_iter: int = 100
    workers: int = 1


@dataclass(frozen=True)
class InitSpec:
    """Initial condition: ``gibbs``, ``basis_state``, ``file`` or ``gibbs_plus_mode``."""

    kind: str
    index: int | None = None
    eps: float | None = None
    values: tuple[float, ...] | None = None
    text: str = ""


@dataclass(frozen=True)
class EvolveConfig:
    init: InitSpec
    tau_max: float
    samples: int
    method: str = "spectral"
    ode_tol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    formats: tuple[str, ...] = ("json",)


@dataclass(frozen=True)
class FiniteConfig:
    levels: tuple[float, ...]
    rho: float | None = None
    power_tol: float = 1e-12
    power_max_iter: int = 100_000
    tau_max: float | None = None
    samples: int = 41
    init: InitSpec | None = None


@dataclass(frozen=True)
class RunConfig:
    source: str
    level_spec: LevelSpec | None
    n: int | None
    tail_tol: float | None
    solver: SolverConfig
    evolve: EvolveConfig | None
    output: OutputConfig
    finite: FiniteConfig | None
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def model_echo(self) -> dict:
        """Model and truncation sections as parsed, for output files."""
        echo = {}
        for key in ("model", "truncation", "finite"):
            if key in self.raw:
                echo[key] = self.raw[key]
        return echo


def _check_keys(section: dict, allowed, where: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{where}.{key}'" if where else f"unknown section '{key}'")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key '{where}.{key}'")
    return section[key]


def _real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{name}' must be a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ConfigError(f"'{name}' must be finite")
    return x


def _positive(value, name: str) -> float:
    x = _real(value, name)
    if not x > 0.0:
        raise ConfigError(f"'{name}' must be positive")
    return x


def _int(value, name: str, low: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer, got {value!r}")
    if value < low:
        raise ConfigError(f"'{name}' must be at least {low}")
    return value


def parse_init(text: str, n: int | None, base: Path, where: str) -> InitSpec:
    if not isinstance(text, str):
        raise ConfigError(f"'{where}' must be a string")
    kind, _, arg = text.partition(":")
    if kind == "gibbs" and not arg:
        return InitSpec("gibbs", text=text)
    if kind == "basis_state":
        try:
            m = int(arg)
        except ValueError:
            raise ConfigError(f"'{where}': basis_state needs an integer index, got {arg!r}") from None
        if m < 1 or (n is not None and m > n):
            raise ConfigError(f"'{where}': basis state {m} outside 1..{n}")
        return InitSpec("basis_state", index=m, text=text)
    if kind == "gibbs_plus_mode":
        parts = arg.split(",")
        if len(parts) != 2:
            raise ConfigError(f"'{where}': expected gibbs_plus_mode:<k>,<eps>")
        try:
            k, eps = int(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"'{where}': cannot parse {arg!r}") from None
        if k < 2 or (n is not None and k > n):
            raise ConfigError(f"'{where}': mode {k} outside 2..{n}")
        if not math.isfinite(eps):
            raise ConfigError(f"'{where}': eps must be finite")
        return InitSpec("gibbs_plus_mode", index=k, eps=eps, text=text)
    if kind == "file":
        path = Path(arg)
        if not path.is_absolute():
            path = base / path
        try:
            raw = path.read_text()
        except OSError as exc:
            raise ConfigError(f"'{where}': cannot read {path}: {exc.strerror}") from None
        try:
            values = np.array([float(tok) for tok in raw.replace(",", " ").split()])
        except ValueError:
            raise ConfigError(f"'{where}': {path} holds a non-numeric entry") from None
        if n is not None and values.size != n:
            raise ConfigError(f"'{where}': {path} has {values.size} entries, expected {n}")
        try:
            ProbabilityVector.from_values(values, strict=True)
        except DomainError as exc:
            raise ConfigError(f"'{where}': {path}: {exc}") from None
        return InitSpec("file", values=tuple(values.tolist()), text=text)
    raise ConfigError(f"'{where}': unknown initial condition {text!r}")


def _level_spec(model: dict) -> LevelSpec:
    _check_keys(model, {"levels", "omega", "offset", "values", "alpha", "theta", "gap_constant"}, "model")
    kind = _need(model, "levels", "model")
    alpha = _real(_need(model, "alpha", "model"), "model.alpha")
    if not alpha > 1.0:
        raise ConfigError("alpha must exceed 1")
    theta = _real(_need(model, "theta", "model"), "model.theta")
    gap = _real(_need(model, "gap_constant", "model"), "model.gap_constant")
    try:
        if kind == "affine":
            for key in ("values",):
                if key in model:
                    raise ConfigError(f"'model.{key}' does not apply to affine levels")
            omega = _real(_need(model, "omega", "model"), "model.omega")
            offset = _real(_need(model, "offset", "model"), "model.offset")
            return LevelSpec.affine(omega, alpha, theta, gap, offset)
        if kind == "explicit":
            for key in ("omega", "offset"):
                if key in model:
                    raise ConfigError(f"'model.{key}' does not apply to explicit levels")
            values = _need(model, "values", "model")
            if not isinstance(values, list):
                raise ConfigError("'model.values' must be a list")
            vals = [_real(v, "model.values") for v in values]
            return LevelSpec.explicit(vals, alpha, theta, gap)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"'model.levels' must be 'affine' or 'explicit', got {kind!r}")


def parse_config(data: dict, base: Path | str = ".", source: str = "<memory>") -> RunConfig:
    base = Path(base)
    _check_keys(data, {"model", "truncation", "solver", "evolve", "output", "finite"}, "")
    for key, val in data.items():
        if not isinstance(val, dict):
            raise ConfigError(f"'{key}' must be a section")

    spec = n = tail_tol = None
    if "model" in data or "truncation" in data:
        for section in ("model", "truncation"):
            if section not in data:
                raise ConfigError(f"missing required section '{section}'")
        spec = _level_spec(data["model"])
        trunc = data["truncation"]
        _check_keys(trunc, {"n", "tail_tol"}, "truncation")
        n = _int(_need(trunc, "n", "truncation"), "truncation.n", 1)
        if spec.max_levels is not None and n > spec.max_levels:
            raise ConfigError(f"truncation.n={n} exceeds the {spec.max_levels} explicit levels")
        if "tail_tol" in trunc:
            tail_tol = _positive(trunc["tail_tol"], "truncation.tail_tol")
            beta = min(1.0, spec.alpha, (spec.alpha - 1.0) / 2.0)
            tb = tail_bound(spec, n, beta).value
            if tb > tail_tol:
                raise ConfigError(f"tail bound {tb!r} exceeds truncation.tail_tol={tail_tol!r}; raise n")

    sol = data.get("solver", {})
    _check_keys(sol, {"bisect_tol", "residual_tol", "newton_max_iter", "workers"}, "solver")
    solver = SolverConfig(
        bisect_tol=_positive(sol.get("bisect_tol", 1e-3), "solver.bisect_tol"),
        residual_tol=_positive(sol.get("residual_tol", 1e-11), "solver.residual_tol"),
        newton_max_iter=_int(sol.get("newton_max_iter", 100), "solver.newton_max_iter"),
        workers=_int(sol.get("workers", 1), "solver.workers"),
    )
    if not solver.bisect_tol < 1.0:
        raise ConfigError("'solver.bisect_tol' must be below 1")

    evolve = None
    if "evolve" in data:
        ev = data["evolve"]
        _check_keys(ev, {"init", "tau_max", "samples", "method", "ode_tol"}, "evolve")
        if n is None:
            raise ConfigError("'evolve' needs the model and truncation sections")
        method = ev.get("method", "spectral")
        if method not in METHODS:
            raise ConfigError(f"'evolve.method' must be one of {', '.join(METHODS)}, got {method!r}")
        evolve = EvolveConfig(
            init=parse_init(_need(ev, "init", "evolve"), n, base, "evolve.init"),
            tau_max=_positive(_need(ev, "tau_max", "evolve"), "evolve.tau_max"),
            samples=_int(_need(ev, "samples", "evolve"), "evolve.samples", 2),
            method=method,
            ode_tol=_positive(ev.get("ode_tol", 1e-10), "evolve.ode_tol"),
        )

    out = data.get("output", {})
    _check_keys(out, {"dir", "formats"}, "output")
    out_dir = out.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("'output.dir' must be a nonempty string")
    formats = out.get("formats", ["json"])
    if not isinstance(formats, list) or not formats or any(f not in SPECTRUM_FORMATS for f in formats):
        raise ConfigError(f"'output.formats' must be a nonempty list drawn from {', '.join(SPECTRUM_FORMATS)}")
    output = OutputConfig(out_dir, tuple(formats))

    finite = None
    if "finite" in data:
        finite = _finite(data["finite"], base)

    if spec is None and finite is None:
        raise ConfigError("config needs a model section or a finite section")
    return RunConfig(source, spec, n, tail_tol, solver, evolve, output, finite, data)


def _finite(fin: dict, base: Path) -> FiniteConfig:
    _check_keys(fin, {"levels", "rho", "power_tol", "power_max_iter", "tau_max", "samples", "init"}, "finite")
    levels = _need(fin, "levels", "finite")
    if not isinstance(levels, list) or len(levels) < 2:
        raise ConfigError("'finite.levels' must list at least two levels")
    vals = tuple(_real(v, "finite.levels") for v in levels)
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("'finite.levels' must be strictly decreasing")
    n = len(vals)
    rho = _positive(fin["rho"], "finite.rho") if "rho" in fin else None
    init = parse_init(fin["init"], n, base, "finite.init") if "init" in fin else None
    if init is not None and init.kind == "gibbs_plus_mode":
        raise ConfigError("'finite.init' supports gibbs, basis_state and file")
    return FiniteConfig(
        levels=vals,
        rho=rho,
        power_tol=_positive(fin.get("power_tol", 1e-12), "finite.power_tol"),
        power_max_iter=_int(fin.get("power_max_iter", 100_000), "finite.power_max_iter"),
        tau_max=_positive(fin["tau_max"], "finite.tau_max") if "tau_max" in fin else None,
        samples=_int(fin.get("samples", 41), "finite.samples", 8),
        init=init,
    )


def load_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.parent, str(path))
