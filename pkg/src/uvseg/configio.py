"""Strict dataclass <-> dict conversion for JSON configs and checkpoints.

Unknown keys are rejected so a typo in a config file fails loudly instead
of silently falling back to a default.
"""

import dataclasses

from .errors import ConfigError


def build_dataclass(cls, data, path="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    field_map = {f.name: f for f in dataclasses.fields(cls)}
    # accept the spec-facing spelling of the generalist weight
    if "lambda" in data and "lam" in field_map and "lam" not in data:
        data = dict(data)
        data["lam"] = data.pop("lambda")
    unknown = set(data) - set(field_map)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = field_map[name]
        if dataclasses.is_dataclass(f.type) and isinstance(value, dict):
            kwargs[name] = build_dataclass(f.type, value, f"{path}.{name}")
        elif isinstance(value, list) and _wants_tuple(f):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _wants_tuple(f):
    t = f.type
    if t is tuple:
        return True
    return isinstance(t, str) and t.startswith("tuple")
