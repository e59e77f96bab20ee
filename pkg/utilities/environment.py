import logging
import os
import sys

from dotenv import load_dotenv

__all__ = [
    "EnvironmentSettings",
    "configure_logging",
]

load_dotenv()

_PREFIX = "ATLASREG"
_COLORS = {
    logging.DEBUG: "\033[36m",
    logging.INFO: "\033[32m",
    logging.WARNING: "\033[33m",
    logging.ERROR: "\033[31m",
    logging.CRITICAL: "\033[35m",
}
_RESET = "\033[0m"


class EnvironmentSettings:
    """
    Presentation settings read from the environment (or a ``.env`` file). Never used for numerics.
    """

    @staticmethod
    def get_verbosity(default: str = "INFO") -> int:
        name = os.getenv(EnvironmentSettings._normalize_key("verbosity"), default).upper()
        level = logging.getLevelName(name)
        if not isinstance(level, int):
            raise ValueError(f"Unknown verbosity level: {name}")
        return level

    @staticmethod
    def use_color(default: bool = False) -> bool:
        value = os.getenv(EnvironmentSettings._normalize_key("color"))
        if value is None:
            return default and sys.stderr.isatty()
        return value.strip().lower() in {"1", "true", "yes", "on"}

    @staticmethod
    def _normalize_key(setting: str) -> str:
        return f"{_PREFIX}_{setting.upper().replace('-', '_').replace(' ', '_')}"


class _ColorFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        return f"{_COLORS.get(record.levelno, '')}{message}{_RESET}"


def configure_logging(verbosity: int | None = None) -> None:
    """
    Install a single stderr handler on the root logger. Library modules only create loggers.

    :param verbosity: Explicit level; defaults to ``ATLASREG_VERBOSITY``
    """
    level = verbosity if verbosity is not None else EnvironmentSettings.get_verbosity()
    formatter_type = _ColorFormatter if EnvironmentSettings.use_color() else logging.Formatter
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter_type("%(asctime)s %(levelname)s %(name)s: %(message)s"))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level)
