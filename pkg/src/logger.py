import logging
import os
from typing import Optional

from config import Config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logger(log_file: Optional[str] = None, level: Optional[str] = None):
    """Configure logging for the pipeline"""
    config = Config()
    level = level or config.LOG_LEVEL

    handlers = [
        # Console handler
        logging.StreamHandler()
    ]

    if log_file:
        # Create logs directory if it doesn't exist
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    # replaces handlers left by an earlier run in the same process
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )

    # Create and return root logger
    return logging.getLogger()
