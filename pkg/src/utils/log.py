import logging
import os
import sys
from typing import Optional

_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None, default: str = "INFO") -> None:
    """Install one stderr handler on the package logger (idempotent).

    Precedence: explicit level, then MFSEG_LOG_LEVEL, then `default`.
    """
    level = (level or os.environ.get("MFSEG_LOG_LEVEL") or default).upper()
    logger = logging.getLogger("src")
    logger.setLevel(level)
    if not any(getattr(h, "_mfseg", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt="%H:%M:%S"))
        handler._mfseg = True
        logger.addHandler(handler)
