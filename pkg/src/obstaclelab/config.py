"""Flat key=value run configuration with lossless round-tripping."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .alternation import JointConfig
from .obstacle import ObstacleSolveConfig
from .sphere import SphereSolveConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a batch run needs; unknown keys land in ``params``.

    The file format is one ``key=value`` per line, ``#`` comments and blank
    lines ignored. Values parse as int, then float, then string; formatting
    uses repr for floats so parse(format(cfg)) == cfg exactly.
    """

    scenario: str = "constant"
    n: int = 64
    dim: int = 3
    seed: int = 0
    out: str = "artifacts"
    joint_tol: float = 1e-7
    energy_stagnation: float = 1e-10
    max_outer: int = 80
    obstacle_tol: float = 1e-8
    obstacle_method: str = "psor"
    obstacle_max_iters: int = 60000
    relaxation: float = 1.5
    sphere_tol: float = 1e-7
    sphere_max_iters: int = 400
    params: dict = field(default_factory=dict)

    def joint_config(self) -> JointConfig:
        return JointConfig(
            max_outer=self.max_outer,
            joint_tol=self.joint_tol,
            energy_stagnation=self.energy_stagnation,
            obstacle=self.obstacle_config(),
            sphere=self.sphere_config(),
        )

    def obstacle_config(self) -> ObstacleSolveConfig:
        return ObstacleSolveConfig(
            max_iters=self.obstacle_max_iters,
            tol=self.obstacle_tol,
            relaxation=self.relaxation,
            method=self.obstacle_method,
        )

    def sphere_config(self) -> SphereSolveConfig:
        return SphereSolveConfig(max_iters=self.sphere_max_iters, tol=self.sphere_tol)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig) if f.name != "params"}


def _parse_value(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> RunConfig:
    known = {}
    params = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        value = _parse_value(raw)
        if key in _FIELD_TYPES:
            want = _FIELD_TYPES[key]
            if want in ("int", int) and not isinstance(value, int):
                raise ConfigError(f"line {lineno}: {key} must be an integer")
            if want in ("float", float) and isinstance(value, int):
                value = float(value)
            if want in ("float", float) and not isinstance(value, float):
                raise ConfigError(f"line {lineno}: {key} must be a number")
            if want in ("str", str):
                value = raw
            known[key] = value
        else:
            params[key] = value
    try:
        return RunConfig(params=params, **known)
    except TypeError as err:  # pragma: no cover - defensive
        raise ConfigError(str(err)) from err


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        if f.name == "params":
            continue
        lines.append(f"{f.name}={_format_value(getattr(cfg, f.name))}")
    for key in sorted(cfg.params):
        lines.append(f"{key}={_format_value(cfg.params[key])}")
    return "\n".join(lines) + "\n"


def read_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)
