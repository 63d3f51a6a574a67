from pathlib import Path
from typing import Any, Dict, Iterable, Optional
import copy
import logging

import yaml
from pydantic import ValidationError

from catenoid_lab.core import config as settings
from catenoid_lab.core.exceptions import ConfigurationError, StorageError
from catenoid_lab.schemas.schemas import RunConfig

logger = logging.getLogger(__name__)


def ensure_output_directory(path: Optional[str] = None) -> Path:
    """
    Ensure the run output directory exists
    """
    target = Path(path or settings.OUTPUT_DIR)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Output directory {target} is not writable: {e}")
    return target


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Read a YAML run configuration; an empty or missing path gives an empty mapping
    """
    if not path:
        return {}
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a mapping at top level")
    return data


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply dotted key=value overrides, e.g. evolve.perturbation.amplitude=1e-4.
    Values are parsed as YAML scalars or flow collections.
    """
    result = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Override '{item}' is not of the form key=value")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse override value in '{item}': {e}")

        node = result
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Override '{item}' descends into non-mapping key '{part}'")
            node = child
        node[parts[-1]] = value
    return result


def build_run_config(
    path: Optional[str],
    overrides: Iterable[str] = (),
    **fields: Any,
) -> RunConfig:
    """
    Defaults < YAML file < key=value overrides < explicit command-line fields.
    """
    data = apply_overrides(load_config_file(path), overrides)
    data.update({key: value for key, value in fields.items() if value is not None})
    try:
        run_config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")
    logger.debug(f"Resolved configuration for mode {run_config.mode.value}")
    return run_config
