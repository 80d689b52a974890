"""
Logging for the hivst command line

Result tables go to stdout; log records go to stderr through tqdm so they
do not tear the cohort progress bars. An optional rotating file keeps the
full record of a study run.
"""
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from tqdm import tqdm

from .config import settings
from .errors import ConfigError

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FILE_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5


class TqdmHandler(logging.StreamHandler):
    """Stream handler that writes between progress bar refreshes"""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=self.stream)
        except Exception:
            self.handleError(record)


def resolve_level(level: Optional[str]) -> int:
    name = (level or settings.log_level).upper()
    if name not in LEVELS:
        raise ConfigError(f"Unknown log level {name!r}; use one of {', '.join(LEVELS)}", keys=["HIVST_LOG_LEVEL"])
    return getattr(logging, name)


def setup_logging(
    level: Optional[str] = None,
    log_file: Optional[str] = None,
    log_format: Optional[str] = None
) -> None:
    """
    Configure the root logger for one command run.

    Args:
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL (default: settings)
        log_file: rotating log file path (default: settings, none if unset)
        log_format: record format (default: settings)
    """
    log_file = log_file or settings.log_file
    formatter = logging.Formatter(log_format or settings.log_format)

    root_logger = logging.getLogger()
    root_logger.setLevel(resolve_level(level))
    root_logger.handlers.clear()

    console_handler = TqdmHandler()
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file, maxBytes=LOG_FILE_BYTES, backupCount=LOG_FILE_BACKUPS
        )
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    logging.captureWarnings(True)
    logging.getLogger(__name__).debug(f"Logging at {logging.getLevelName(root_logger.level)}, file={log_file}")
