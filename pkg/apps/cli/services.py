# ============================================================================
# apps/cli/services.py - Config loading, overrides and path checks
# ============================================================================

import logging
import os
from typing import Any, Dict, Iterable, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from shared.errors import ConfigError
from shared.utils import atomic_write_text
from .schemas import DECODE_KEYS, RunConfig

logger = logging.getLogger(__name__)


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """KEY=VALUE strings from repeated --set options"""
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected KEY=VALUE, got {pair!r}", field="set")
        key, value = pair.split("=", 1)
        overrides[key.strip().lower()] = value.strip()
    return overrides


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                scope: Optional[str] = None) -> RunConfig:
    """Built-in defaults < config file < overrides; unknown keys are rejected by name"""
    file_values: Dict[str, Any] = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path} not found", field="config")
        file_values = {k.strip().lower(): v for k, v in dotenv_values(path).items()}
    cli_values = {k: v for k, v in (overrides or {}).items() if v is not None}

    known = set(RunConfig.model_fields)
    for key in list(file_values) + list(cli_values):
        if key not in known:
            raise ConfigError("unknown configuration key", field=key)
    if scope == "train":
        for key in cli_values:
            if key in DECODE_KEYS:
                raise ConfigError("decode-only option is not accepted by train", field=key)

    merged = {k: v for k, v in file_values.items() if v not in (None, "")}
    merged.update(cli_values)
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first.get("loc", ())) or None
        raise ConfigError(first.get("msg", str(e)), field=field)

    logger.info(f"Resolved config: {render_config(config, sep=' ')}")
    return config


def render_config(config: RunConfig, sep: str = "\n") -> str:
    return sep.join(f"{k}={v}" for k, v in config.model_dump().items() if v is not None)


def write_run_config(config: RunConfig, path: str) -> None:
    atomic_write_text(path, render_config(config) + "\n")
    logger.info(f"Run config written to {path}")


def require_paths(config: RunConfig, *fields: str) -> None:
    """Fail before any work when a referenced input path is unset or missing"""
    for field in fields:
        value = getattr(config, field)
        if not value:
            raise ConfigError("path is required for this command", field=field)
        if not os.path.exists(value):
            raise ConfigError(f"{value} does not exist", field=field)
