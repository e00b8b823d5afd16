# laryngen/log.py
"""
Package logger and its configuration.
"""

import logging
import os
from typing import Optional

logger = logging.getLogger("laryngen")

_handler: Optional[logging.Handler] = None


def debug_enabled() -> bool:
    """True when LARYNGEN_DEBUG is set to a truthy value."""
    return os.getenv("LARYNGEN_DEBUG", "False").lower() in ("1", "true", "yes")


def configure_logging(debug: Optional[bool] = None) -> logging.Logger:
    """
    Attach a ``[laryngen]`` stream handler on the current stderr to the
    package logger, replacing the one from an earlier call.

    Args:
        debug: Force DEBUG level; defaults to the LARYNGEN_DEBUG env var

    Returns:
        logging.Logger: The package logger
    """
    global _handler
    if debug is None:
        debug = debug_enabled()
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
    if _handler is not None:
        logger.removeHandler(_handler)
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter("[laryngen] %(levelname)s %(message)s"))
    logger.addHandler(_handler)
    logger.propagate = False
    return logger
