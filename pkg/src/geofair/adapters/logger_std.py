"""Standard logger adapter."""

import json
import logging
import math
import sys
from typing import Any

import numpy as np

from ..ports.logger import LoggerPort

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def log_level(name: str) -> int:
    """Numeric level for a level name such as ``"debug"``; ValueError if unknown."""
    levels = logging.getLevelNamesMapping()
    try:
        return levels[name.upper()]
    except KeyError:
        raise ValueError(f"unknown log level {name!r}") from None


def _jsonable(value: Any) -> Any:
    """JSON fallback for numpy scalars and arrays; anything else becomes its str()."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def _finite_or_text(value: Any) -> Any:
    # NaN and inf are not JSON; a diverging loss is logged as "nan"/"inf" text.
    if isinstance(value, float) and not math.isfinite(value):
        return repr(float(value))
    if isinstance(value, dict):
        return {key: _finite_or_text(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [_finite_or_text(item) for item in value]
    return value


class StdLoggerAdapter(LoggerPort):
    """LoggerPort on the stdlib ``geofair`` logger.

    Structured fields are appended to the message as ``message - {json}``
    with sorted keys, so a run's log lines diff cleanly against another's.
    """

    def __init__(self, name: str = "geofair", level: str = "INFO"):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(log_level(level))

        if not self.logger.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            self.logger.addHandler(handler)

    def debug(self, message: str, **kwargs: Any) -> None:
        self._log(logging.DEBUG, message, kwargs)

    def info(self, message: str, **kwargs: Any) -> None:
        self._log(logging.INFO, message, kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self._log(logging.WARNING, message, kwargs)

    def error(self, message: str, **kwargs: Any) -> None:
        self._log(logging.ERROR, message, kwargs)

    def log_operation(
        self,
        op: str,
        dataset: str,
        sizes: dict[str, int],
        durations: dict[str, float],
    ) -> None:
        self.info(
            f"Operation: {op}",
            op=op,
            dataset=dataset,
            sizes=sizes,
            durations={stage: round(seconds, 6) for stage, seconds in durations.items()},
        )

    def _log(self, level: int, message: str, data: dict[str, Any]) -> None:
        if not self.logger.isEnabledFor(level):
            return
        if data:
            fields = json.dumps(_finite_or_text(data), default=_jsonable, sort_keys=True)
            message = f"{message} - {fields}"
        self.logger.log(level, message)
