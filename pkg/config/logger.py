import logging
import logging.handlers
import os
import sys

from config.constants import DB_LOG_FILE, LOG_FILE, LOGGER_NAME


def _rotating_file(log_dir: str, filename: str) -> logging.Handler:
    return logging.handlers.TimedRotatingFileHandler(
        filename=os.path.join(log_dir, filename),
        when="midnight",
        interval=1,
        backupCount=7,
        encoding="utf-8",
    )


def setup_logger(
    log_level: int = logging.INFO, log_dir: str = "logs"
) -> logging.Logger:
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(log_level)
    # stderr is reserved for the one-line command error report
    console_handler = logging.StreamHandler(sys.stdout)
    file_handler = _rotating_file(log_dir, LOG_FILE)

    datefmt = "%Y-%m-%d %H:%M:%S"
    formatter = logging.Formatter(
        "[{asctime}] [{levelname:<8}] {name}: {message}",
        datefmt=datefmt,
        style="{",
    )
    console_handler.setFormatter(formatter)
    file_handler.setFormatter(formatter)
    if not logger.hasHandlers():
        logger.addHandler(console_handler)
        logger.addHandler(file_handler)

    # Checkpoint store chatter goes to its own file.
    db_logger = logging.getLogger("sqlalchemy.engine")
    db_logger.setLevel(logging.WARNING)
    db_file_handler = _rotating_file(log_dir, DB_LOG_FILE)
    db_file_handler.setFormatter(formatter)
    if not db_logger.hasHandlers():
        db_logger.addHandler(db_file_handler)
    return logger
