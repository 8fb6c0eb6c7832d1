"""Logging setup shared by all wehrlab modules.

Modules call `get_logger(__name__)`. A single stderr handler sits on the
`wehrlab` package logger and module loggers propagate to it, so the level is
controlled in one place: WARNING by default, DEBUG when WEHRLAB_DEBUG is set
to 1/true/yes, or whatever `configure_logging` was given (the CLI's -v).
"""

import logging
import os
from functools import lru_cache

PACKAGE = "wehrlab"
DEBUG_ENV_VAR = "WEHRLAB_DEBUG"
LOG_FORMAT = "[%(name)s] %(levelname)s: %(message)s"


def _env_level() -> int:
    if os.environ.get(DEBUG_ENV_VAR, "").lower() in ("1", "true", "yes"):
        return logging.DEBUG
    return logging.WARNING


@lru_cache(maxsize=1)
def _package_logger() -> logging.Logger:
    logger = logging.getLogger(PACKAGE)
    logger.setLevel(_env_level())
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    return logger


def get_logger(name: str) -> logging.Logger:
    """Logger for a wehrlab module; installs the package handler on first use."""
    _package_logger()
    return logging.getLogger(name)


def configure_logging(level: int | None = None) -> None:
    """Set the package log level; None restores the environment default."""
    _package_logger().setLevel(_env_level() if level is None else level)
