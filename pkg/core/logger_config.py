# core/logger_config.py

import logging
import os
import sys
from datetime import datetime
from pathlib import Path

from core.config import Config
from core.errors import ConfigError

CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def _private_log_dir(config: Config) -> Path:
    """LOG_DIRECTORY, created with mode 0o700; must stay under the working directory."""
    log_dir = Path(config.LOG_DIRECTORY).resolve()
    if not log_dir.is_relative_to(Path.cwd().resolve()):
        raise ConfigError(f"LOG_DIRECTORY must be inside the working directory: {log_dir}")
    try:
        log_dir.mkdir(mode=0o700, parents=True, exist_ok=True)
        os.chmod(log_dir, 0o700)
    except OSError as e:
        raise ConfigError(f"Cannot prepare log directory '{log_dir}': {e}")
    return log_dir


def _file_handler(path: Path, config: Config, level: int) -> logging.FileHandler:
    try:
        handler = logging.FileHandler(path, encoding="utf-8")
        os.chmod(path, 0o600)
    except OSError as e:
        raise ConfigError(f"Cannot open log file '{path}': {e}")
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(config.LOG_FORMAT, datefmt=config.LOG_DATE_FORMAT))
    return handler


def setup_logger(config: Config, name: str = None, verbose: bool = False) -> logging.Logger:
    """
    Logger writing to "<LOG_DIRECTORY>/<name>_YYYYMMDD_HHMMSS.log" (mode 0o600).
    Warnings also go to stderr; --verbose lowers both sinks to DEBUG.
    Calling it again for the same name reuses the existing handlers.
    """
    logger_name = name or config.LOGGER_NAME
    level = logging.DEBUG if verbose else config.LOG_LEVEL
    logger = logging.getLogger(logger_name)
    logger.setLevel(level)
    if logger.handlers:
        return logger

    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = _private_log_dir(config) / f"{logger_name}_{stamp}.log"
    logger.addHandler(_file_handler(log_file, config, level))

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    logger.addHandler(console)

    logger.debug(f"Logging to {log_file}")
    return logger
