import logging
import os
import sys
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


class TrialFieldFormatter(logging.Formatter):
    """
    Formatter that appends the trial label injected by TrialContextFilter,
    when the record carries one.
    """

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        trial = getattr(record, 'trial', None)
        if trial:
            return f"{message} [trial={trial}]"
        return message


class LoggerManager:
    """
    Manages the toolkit's logging configuration.

    Records go to stderr (stdout is kept for command output) and, when
    ``file_logging`` is on, to a size-rotated daily file under ``log_dir``.
    """

    def __init__(self,
                 log_dir: str = "logs",
                 level: str = "INFO",
                 file_logging: bool = True):
        if not os.path.isabs(log_dir):
            script_dir = os.path.dirname(os.path.abspath(__file__))
            project_root = os.path.dirname(script_dir)
            log_dir = os.path.join(project_root, log_dir)
        self.log_dir = log_dir
        self.level = self._parse_level(level)
        self.file_logging = file_logging
        self.log_file: Optional[str] = None
        self.setup_logging()

    @staticmethod
    def _parse_level(level: str) -> int:
        value = logging.getLevelName(str(level).upper())
        if not isinstance(value, int):
            raise ValueError(f"Unknown log level: {level!r}")
        return value

    def setup_logging(self) -> None:
        formatter = TrialFieldFormatter(LOG_FORMAT)

        root_logger = logging.getLogger()
        root_logger.setLevel(self.level)
        if root_logger.hasHandlers():
            root_logger.handlers.clear()

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)

        if self.file_logging:
            try:
                os.makedirs(self.log_dir, exist_ok=True)
                self.log_file = os.path.join(
                    self.log_dir,
                    f"log_{datetime.now().strftime('%Y-%m-%d')}.txt")
                file_handler = RotatingFileHandler(self.log_file,
                                                   maxBytes=5 * 1024 * 1024,
                                                   backupCount=5,
                                                   encoding='utf-8')
                file_handler.setFormatter(formatter)
                root_logger.addHandler(file_handler)
            except OSError as e:
                self.log_file = None
                logging.warning("File logging disabled: %s", e)

        logging.debug("LoggerManager initialized (level=%s, file=%s).",
                      logging.getLevelName(self.level), self.log_file)


def get_logger(name: str = "sgm") -> logging.Logger:
    """
    Returns a logger instance for a specific part of the toolkit.
    """
    return logging.getLogger(name)


def handle_global_exception(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return

    logger = get_logger("GlobalExceptionHandler")
    logger.critical("An unhandled exception occurred.",
                    exc_info=(exc_type, exc_value, exc_traceback))


def setup_exception_hook():
    sys.excepthook = handle_global_exception
    logging.debug("Global exception hook has been set.")
