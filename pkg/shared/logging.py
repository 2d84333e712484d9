# ============================================================================
# shared/logging.py - Logging configuration
# ============================================================================

import logging
from pathlib import Path
from typing import Optional

from config import LOG_LEVEL, LOG_DIR

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
APP_LOGGERS = ["numcore", "corpus", "stylelab", "encoder", "planner",
               "realizer", "training", "inference", "metrics", "cli"]


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None) -> None:
    """Configure application logging"""
    level_name = (level or LOG_LEVEL).upper()

    # Create logs directory if it doesn't exist
    directory = Path(log_dir or LOG_DIR)
    directory.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=getattr(logging, level_name),
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(directory / "plangen.log")
        ],
        force=True
    )

    # Set up app-specific loggers
    for app_name in APP_LOGGERS:
        app_logger = logging.getLogger(f"apps.{app_name}")
        for handler in list(app_logger.handlers):
            app_logger.removeHandler(handler)
            handler.close()
        app_handler = logging.FileHandler(directory / f"{app_name}.log")
        app_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        app_logger.addHandler(app_handler)
