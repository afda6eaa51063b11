"""Logger setup."""

import os
import sys
from typing import Optional

from loguru import logger

LOG_LEVEL_ENV = "CAUSAL_RULES_LOG_LEVEL"


def configure_logging(level: Optional[str] = None) -> str:
    """Send log records to stderr at the requested level (env var, else INFO)."""
    level = (level or os.environ.get(LOG_LEVEL_ENV) or "INFO").upper()
    logger.remove()
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}",
    )
    return level
