"""Experiment configuration files.

Flat ``key = value`` lines under ``[section]`` headers; ``#`` and ``;`` start
comments.  Every key may be overridden from the environment as
``SIM_<SECTION>_<KEY>`` (upper case), e.g. ``SIM_MODEL_H=0.3``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from .lambda_model import (
    DEFAULT_ALPHA,
    DEFAULT_GAMMA,
    DEFAULT_OMEGA_C,
    DEFAULT_TEMPERATURE,
    LambdaParams,
    Mode,
)
from .numerics import OdeControl
from .observables import SWEEPABLE, SweepSpec


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class ModelSection:
    mode: Mode = Mode.RAMAN
    h: float = 0.5
    omega: float = 0.5
    nu: float = 6.0
    kappa: float | None = None
    gamma: float = DEFAULT_GAMMA
    alpha: float = DEFAULT_ALPHA
    omega_c: float = DEFAULT_OMEGA_C
    temperature: float = DEFAULT_TEMPERATURE


@dataclass(frozen=True)
class SweepSection:
    parameter: str = "h"
    min: float = 0.05
    max: float = 2.0
    points: int = 40
    spacing: str = "linear"

    def grid(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.min])
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class IntegratorSection:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_max: float = 1e6
    termination: float = 1e-4
    method: str = "exact"


@dataclass(frozen=True)
class OracleSection:
    enabled: bool = False
    trajectories: int = 10_000
    seed: int = 12345


@dataclass(frozen=True)
class OutputSection:
    directory: str = "."
    prefix: str = "run"


@dataclass(frozen=True)
class RatesSection:
    targets: tuple[float, ...] = (0.9, 0.99, 0.999, 0.9999)
    modes: tuple[Mode, ...] = (Mode.PULSE_RELAX, Mode.RAMAN)
    gammas: tuple[float, ...] = (0.0, 0.05)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    sweep: SweepSection | None = None
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    output: OutputSection = field(default_factory=OutputSection)
    rates: RatesSection | None = None

    def params(self) -> LambdaParams:
        m = self.model
        return LambdaParams(
            h=m.h,
            omega=m.omega,
            nu=m.nu,
            kappa=m.kappa,
            gamma=m.gamma,
            alpha=m.alpha,
            omega_c=m.omega_c,
            temperature=m.temperature,
            mode=m.mode,
        )

    def control(self) -> OdeControl:
        i = self.integrator
        return OdeControl(
            rel_tol=i.rel_tol,
            abs_tol=i.abs_tol,
            t_max=i.t_max,
            termination_threshold=i.termination,
            method=i.method,
        )

    def sweep_spec(self) -> SweepSpec | None:
        if self.sweep is None:
            return None
        # kappa follows 3h unless it was pinned explicitly
        return SweepSpec(
            self.sweep.parameter,
            tuple(self.sweep.grid()),
            self.params(),
            kappa_tracks_h=self.model.kappa is None,
        )


_SECTIONS = {
    "model": ModelSection,
    "sweep": SweepSection,
    "integrator": IntegratorSection,
    "oracle": OracleSection,
    "output": OutputSection,
    "rates": RatesSection,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _converter(section: str, key: str):
    if section == "model":
        if key == "mode":
            return Mode
        return _parse_float
    if section == "sweep":
        return {"parameter": str, "points": int, "spacing": str}.get(key, _parse_float)
    if section == "integrator":
        return str if key == "method" else _parse_float
    if section == "oracle":
        return {"enabled": _parse_bool, "trajectories": int, "seed": int}[key]
    if section == "output":
        return str
    if section == "rates":
        if key == "modes":
            return lambda s: tuple(Mode(x.strip()) for x in s.split(",") if x.strip())
        return lambda s: tuple(_parse_float(x) for x in s.split(",") if x.strip())
    raise KeyError(section)


def _check_section(name: str, sec, line: int | None, source: str):
    if name == "sweep":
        if sec.parameter not in SWEEPABLE:
            raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}", line, source)
        if sec.spacing not in ("linear", "log"):
            raise ConfigError("sweep spacing must be 'linear' or 'log'", line, source)
        if sec.points < 1 or (sec.points > 1 and not sec.max > sec.min):
            raise ConfigError("sweep needs points >= 1 and max > min", line, source)
        if sec.spacing == "log" and sec.min <= 0:
            raise ConfigError("log spacing needs min > 0", line, source)
    if name == "rates":
        if any(not 0 < f < 1 for f in sec.targets) or not sec.targets:
            raise ConfigError("rate targets must lie in (0, 1)", line, source)
    if name == "oracle" and sec.trajectories < 1:
        raise ConfigError("oracle trajectories must be >= 1", line, source)


def parse_config(
    text: str, env: Mapping[str, str] | None = None, source: str = "<config>"
) -> ExperimentConfig:
    """Parse configuration text; ``env`` (default ``os.environ``) supplies overrides."""
    env = os.environ if env is None else env
    values: dict[str, dict[str, object]] = {}
    header_line: dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, source)
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            if section in values:
                raise ConfigError(f"duplicate section [{section}]", lineno, source)
            values[section] = {}
            header_line[section] = lineno
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if section is None:
            raise ConfigError("key outside of any section", lineno, source)
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        allowed = {f.name for f in fields(_SECTIONS[section])}
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, source)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        try:
            values[section][key] = _converter(section, key)(val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}", lineno, source) from None

    for name, cls in _SECTIONS.items():
        for f in fields(cls):
            var = f"SIM_{name.upper()}_{f.name.upper()}"
            if var in env:
                try:
                    values.setdefault(name, {})[f.name] = _converter(name, f.name)(env[var])
                except (ValueError, KeyError) as exc:
                    raise ConfigError(f"bad value in ${var}: {exc}", None, source) from None

    built = {}
    for name, cls in _SECTIONS.items():
        if name in values:
            sec = cls(**values[name])
            _check_section(name, sec, header_line.get(name), source)
            built[name] = sec
    cfg = ExperimentConfig(**built)
    try:
        cfg.params()
        cfg.control()
    except ValueError as exc:
        raise ConfigError(str(exc), header_line.get("model"), source) from None
    return cfg


def load_config(path: str, env: Mapping[str, str] | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), env, source=str(path))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Mode):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        if sec is None:
            continue
        out.append(f"[{name}]")
        for f in fields(sec):
            value = getattr(sec, f.name)
            if value is None:
                continue
            out.append(f"{f.name} = {_format(value)}")
        out.append("")
    return "\n".join(out)


def with_model(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, model=replace(cfg.model, **changes))
