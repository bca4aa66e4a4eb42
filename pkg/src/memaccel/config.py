"""Strict YAML loaders for model, hardware, cost-table and sweep files.

Every file maps one-to-one onto a dataclass; unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .hardware import (AreaModel, CiDSpec, CiMSpec, CostTable, HardwareSpec,
                       HBMIOSpec, InternalLink, InterposerLink, LogicDieSpec,
                       SystolicSpec)
from .workload import ModelSpec


class ConfigError(ValueError):
    pass


def _load_yaml(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping at top level")
    return data


def _coerce(ftype: str, val, key: str, where: str):
    # PyYAML reads "1.0e9" (no exponent sign) as a string; coerce by the
    # declared field type so config files can use plain scientific notation.
    try:
        if ftype == "int":
            as_float = float(val)
            as_int = int(as_float)
            if as_int != as_float:
                raise ValueError(f"{key} must be an integer, got {val!r}")
            return as_int
        if ftype == "float":
            return float(val)
        if ftype == "bool":
            if isinstance(val, bool):
                return val
            raise ValueError(f"{key} must be true/false, got {val!r}")
        if ftype == "str":
            return str(val)
        if ftype.startswith("tuple"):
            return tuple(int(x) for x in val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: field {key}: {exc}") from exc
    return val


def _build(cls, data: dict, where: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}; "
                          f"allowed: {sorted(fields)}")
    coerced = {key: _coerce(str(fields[key].type), val, key, where)
               for key, val in data.items()}
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_model(path: str | Path) -> ModelSpec:
    return _build(ModelSpec, _load_yaml(path), f"model file {path}")


_HW_SECTIONS = {
    "cid": CiDSpec,
    "cim": CiMSpec,
    "logic_die": LogicDieSpec,
    "systolic": SystolicSpec,
    "interposer": InterposerLink,
    "internal_link": InternalLink,
    "hbm_io": HBMIOSpec,
    "area": AreaModel,
}


def load_hardware(path: str | Path, overrides: dict | None = None) -> HardwareSpec:
    data = _load_yaml(path)
    unknown = set(data) - set(_HW_SECTIONS)
    if unknown:
        raise ConfigError(f"hardware file {path}: unknown sections {sorted(unknown)}; "
                          f"allowed: {sorted(_HW_SECTIONS)}")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _HW_SECTIONS or not key:
            raise ConfigError(f"override {dotted!r}: expected <section>.<field>")
        data.setdefault(section, {})[key] = value
    parts = {}
    for section, cls in _HW_SECTIONS.items():
        parts[section] = _build(cls, data.get(section, {}), f"{path}:{section}")
    return HardwareSpec(**parts)


def load_cost_table(path: str | Path) -> CostTable:
    return _build(CostTable, _load_yaml(path), f"cost table {path}")


def load_sweep(path: str | Path):
    """Sweep grid definition; model entries are paths relative to the file."""
    from .engine import SweepSpec

    data = _load_yaml(path)
    allowed = {"models", "strategies", "l_in", "l_out", "batch"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"sweep file {path}: unknown keys {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")
    missing = {"models", "strategies", "l_in", "l_out"} - set(data)
    if missing:
        raise ConfigError(f"sweep file {path}: missing keys {sorted(missing)}")
    base = Path(path).parent
    models = []
    for entry in data["models"]:
        p = Path(entry)
        models.append(load_model(p if p.is_absolute() else base / p))
    return SweepSpec(models=models,
                     strategies=[str(s) for s in data["strategies"]],
                     l_in=[int(x) for x in data["l_in"]],
                     l_out=[int(x) for x in data["l_out"]],
                     batch=[int(x) for x in data.get("batch", [1])])
