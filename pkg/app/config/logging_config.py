"""
Logging Configuration Module

Attaches a single stderr handler to the root logger so every
``logging.getLogger(__name__)`` call in the toolkit renders with the
configured format while stdout stays free for command output.
"""

import logging
import sys
from typing import Optional

from app.config.settings import get_settings


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging for command-line runs.

    Args:
        level: Log level name; defaults to the configured setting
    """
    settings = get_settings()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(settings.log_format))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel((level or settings.log_level).upper())
