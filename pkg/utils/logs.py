# utils/logs.py
import logging
import os
import sys

LOG_LEVEL = os.environ.get("NETPRIV_LOG_LEVEL", "INFO")

_FORMAT = "[%(name)s] %(levelname)s %(message)s"


def setup_logging(level: str | int | None = None) -> None:
    """Install one stream handler on the root logger (idempotent)."""
    level = level if level is not None else LOG_LEVEL
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root = logging.getLogger()
    handler = next((h for h in root.handlers if getattr(h, "_netpriv", False)), None)
    if handler is None:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler._netpriv = True
        root.addHandler(handler)
    else:
        # sys.stderr may have been swapped since the first call
        handler.setStream(sys.stderr)
    root.setLevel(level)
