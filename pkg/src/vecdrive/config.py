"""Scenario configuration and the flat ``section.key = value`` file format.

Grammar (UTF-8)::

    line      := blank | comment | entry
    comment   := '#' any*
    entry     := key '=' value [comment]
    key       := name | section '.' name       section in {motor, foc, dtc}
    value     := number | word | profile
    profile   := step (',' step)*              step := time ':' torque

Keys not present take the documented defaults.  Unknown or repeated keys
are errors.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dtc import DtcConfig
from .errors import ConfigError
from .foc import FocConfig
from .machine import MAX_PLANT_DT, MotorParams
from .metrics import DEFAULT_WINDOW

CONTROLLERS = ("foc", "dtc")
_RATIO_TOL = 1e-9


def _is_multiple(value: float, base: float) -> bool:
    ratio = value / base
    return round(ratio) >= 1 and abs(ratio - round(ratio)) <= _RATIO_TOL * max(1.0, ratio)


@dataclass(frozen=True)
class ScenarioConfig:
    controller: str = "dtc"
    speed_ref: float = 1500.0
    load_profile: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    duration: float = 3.0
    plant_dt: float = 5e-6
    ctrl_dt: float = 50e-6
    window: float = DEFAULT_WINDOW
    steady_window: float = 1.0
    trace_decimation: int = 20
    motor: MotorParams = field(default_factory=MotorParams)
    foc: FocConfig = field(default_factory=FocConfig)
    dtc: DtcConfig = field(default_factory=DtcConfig)
    defaults_used: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"must be one of {CONTROLLERS}", "controller")
        for name in ("speed_ref",):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError("must be finite", name)
        for name in ("duration", "plant_dt", "ctrl_dt", "window", "steady_window"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError("must be finite and strictly positive", name)
        if self.plant_dt > MAX_PLANT_DT:
            raise ConfigError(f"must not exceed {MAX_PLANT_DT} s", "plant_dt")
        if self.duration < self.plant_dt * (1 - _RATIO_TOL):
            raise ConfigError("must be at least one plant step", "duration")
        if not _is_multiple(self.ctrl_dt, self.plant_dt):
            raise ConfigError("must be an integer multiple of plant_dt", "ctrl_dt")
        if not _is_multiple(self.window, self.plant_dt):
            raise ConfigError("must be an integer multiple of plant_dt", "window")
        if int(self.trace_decimation) != self.trace_decimation or self.trace_decimation < 1:
            raise ConfigError("must be an integer >= 1", "trace_decimation")
        if not self.load_profile:
            raise ConfigError("needs at least one step", "load_profile")
        last = -math.inf
        for t, torque in self.load_profile:
            if not (math.isfinite(t) and math.isfinite(torque)):
                raise ConfigError("times and torques must be finite", "load_profile")
            if t <= last:
                raise ConfigError("step times must be strictly increasing", "load_profile")
            if t < 0 or t > self.duration:
                raise ConfigError(f"step time {t} outside [0, duration]", "load_profile")
            last = t
        if self.foc.T_max > 2.0 * self.motor.rated_torque:
            raise ConfigError("must not exceed twice the rated torque", "foc.T_max")
        for section in ("foc", "dtc"):
            if not math.isclose(getattr(self, section).T_ctrl, self.ctrl_dt, rel_tol=1e-12):
                raise ConfigError("must equal ctrl_dt", f"{section}.T_ctrl")

    @property
    def omega_ref(self) -> float:
        """Speed reference in mechanical rad/s."""
        return self.speed_ref * 2.0 * math.pi / 60.0

    @property
    def n_plant_steps(self) -> int:
        return int(math.floor(self.duration / self.plant_dt + _RATIO_TOL))

    @property
    def ctrl_ratio(self) -> int:
        return int(round(self.ctrl_dt / self.plant_dt))

    @property
    def window_steps(self) -> int:
        return int(round(self.window / self.plant_dt))

    def load_at(self, t: float) -> float:
        torque = 0.0
        for t_step, value in self.load_profile:
            if t >= t_step:
                torque = value
            else:
                break
        return torque

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


_TOP_LEVEL = {
    "controller": str,
    "speed_ref": float,
    "load_profile": "profile",
    "duration": float,
    "plant_dt": float,
    "ctrl_dt": float,
    "window": float,
    "steady_window": float,
    "trace_decimation": int,
}
_SECTIONS = {"motor": MotorParams, "foc": FocConfig, "dtc": DtcConfig}


def _section_types(cls) -> dict[str, type]:
    defaults = cls()
    return {f.name: type(getattr(defaults, f.name)) for f in dataclasses.fields(cls)}


def _convert(raw: str, kind, key: str):
    try:
        if kind == "profile":
            return parse_load_profile(raw)
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r}", key) from None


def parse_load_profile(raw: str) -> tuple[tuple[float, float], ...]:
    steps = []
    for chunk in raw.split(","):
        t, sep, torque = chunk.partition(":")
        if not sep:
            raise ValueError(f"load step {chunk.strip()!r} is not 'time:torque'")
        steps.append((float(t), float(torque)))
    return tuple(steps)


def format_load_profile(profile) -> str:
    return ", ".join(f"{t:.9g}:{torque:.9g}" for t, torque in profile)


def parse_config_text(text: str) -> dict[str, object]:
    """Parse config text into a flat ``{dotted_key: typed value}`` mapping."""
    entries: dict[str, object] = {}
    section_types = {name: _section_types(cls) for name, cls in _SECTIONS.items()}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key or not raw:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key", key)
        section, dot, name = key.partition(".")
        if dot:
            kinds = section_types.get(section)
            if kinds is None or name not in kinds:
                raise ConfigError(f"line {lineno}: unknown key", key)
            kind = kinds[name]
        else:
            if key not in _TOP_LEVEL:
                raise ConfigError(f"line {lineno}: unknown key", key)
            kind = _TOP_LEVEL[key]
        entries[key] = _convert(raw, kind, key)
    return entries


def config_from_entries(entries: dict[str, object]) -> ScenarioConfig:
    """Build a validated config; missing keys default and are listed in ``defaults_used``."""
    top = {k: v for k, v in entries.items() if "." not in k}
    defaults_used = [k for k in _TOP_LEVEL if k not in top]
    sections = {}
    for section, cls in _SECTIONS.items():
        values = {k.split(".", 1)[1]: v for k, v in entries.items() if k.startswith(section + ".")}
        defaults_used += [f"{section}.{f.name}" for f in dataclasses.fields(cls) if f.name not in values]
        sections[section] = values
    ctrl_dt = top.get("ctrl_dt", ScenarioConfig.ctrl_dt)
    # controller periods follow the scenario control period unless set explicitly
    for section in ("foc", "dtc"):
        sections[section].setdefault("T_ctrl", ctrl_dt)
    try:
        return ScenarioConfig(
            **top,
            motor=MotorParams(**sections["motor"]),
            foc=FocConfig(**sections["foc"]),
            dtc=DtcConfig(**sections["dtc"]),
            defaults_used=tuple(defaults_used),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    return config_from_entries(parse_config_text(text))


def config_to_entries(config: ScenarioConfig) -> dict[str, object]:
    entries: dict[str, object] = {}
    for name in _TOP_LEVEL:
        entries[name] = getattr(config, name)
    for section in _SECTIONS:
        obj = getattr(config, section)
        for f in dataclasses.fields(obj):
            entries[f"{section}.{f.name}"] = getattr(obj, f.name)
    return entries


def format_value(value) -> str:
    if isinstance(value, tuple):
        return format_load_profile(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: ScenarioConfig) -> str:
    """Serialize the effective config; defaulted keys are marked in a comment."""
    defaulted = set(config.defaults_used)
    lines = ["# effective scenario configuration"]
    for key, value in config_to_entries(config).items():
        note = "  # default" if key in defaulted else ""
        lines.append(f"{key} = {format_value(value)}{note}")
    return "\n".join(lines) + "\n"
