import json
from os import PathLike
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from components.errors import ConfigError

__all__ = [
    "parse_config",
    "load_config",
    "apply_overrides",
]

ConfigType = TypeVar("ConfigType", bound=BaseModel)


def parse_config(json_string: str, config_type: type[ConfigType]) -> ConfigType:
    try:
        return config_type.model_validate_json(json_string.strip())
    except ValidationError as error:
        raise ConfigError(f"Invalid {config_type.__name__}: {error}") from error


def load_config(path: str | PathLike | None, config_type: type[ConfigType], overrides: dict[str, Any] | None = None) -> ConfigType:
    """
    Load a JSON config file (or start from defaults when ``path`` is None) and apply overrides on top

    :param path: The config file, or None for defaults
    :param config_type: The pydantic model to validate against; unknown keys are rejected by the model
    :param overrides: Dotted keys to values, taking precedence over the file
    :return: The resolved config
    """
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8").strip() or "{}")
        except json.JSONDecodeError as error:
            raise ConfigError(f"{path}: not valid JSON ({error})") from error
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: a config file must hold a JSON object")
    if overrides:
        data = apply_overrides(data, overrides)
    try:
        return config_type.model_validate(data)
    except ValidationError as error:
        raise ConfigError(f"Invalid {config_type.__name__}: {error}") from error


def apply_overrides(data: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = json.loads(json.dumps(data))
    for dotted_key, value in overrides.items():
        *parents, key = dotted_key.split(".")
        target = merged
        for parent in parents:
            target = target.setdefault(parent, {})
            if not isinstance(target, dict):
                raise ConfigError(f"Cannot override '{dotted_key}': '{parent}' is not a mapping")
        target[key] = value
    return merged
