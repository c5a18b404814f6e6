"""Lifecycle logging for numerical batches (gain columns, optimizer seeds, scenarios)."""

import os
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from .task_utils import format_time

LOG_FILE = 'tasks.log'
LOG_MAX_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 5


class TaskLogger:
    """Logs to 'grid_robustness.tasks'; configure(log_dir) adds a rotating file."""

    _instance: Optional['TaskLogger'] = None

    def __init__(self):
        if TaskLogger._instance is not None:
            raise RuntimeError("TaskLogger is a singleton. Use get_instance() instead.")
        self._logger = logging.getLogger('grid_robustness.tasks')
        self._file_handler: Optional[RotatingFileHandler] = None

    @classmethod
    def get_instance(cls) -> 'TaskLogger':
        if cls._instance is None:
            cls._instance = TaskLogger()
        return cls._instance

    @property
    def log_file(self) -> Optional[str]:
        return self._file_handler.baseFilename if self._file_handler else None

    def configure(self, log_dir: str):
        """Send task records to <log_dir>/tasks.log, replacing any earlier file."""
        os.makedirs(log_dir, exist_ok=True)
        if self._file_handler is not None:
            self._logger.removeHandler(self._file_handler)
            self._file_handler.close()

        handler = RotatingFileHandler(os.path.join(log_dir, LOG_FILE), maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUPS)
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s [%(task_id)s] %(message)s', datefmt='%Y-%m-%d %H:%M:%S'))
        self._logger.addHandler(handler)
        self._logger.setLevel(logging.DEBUG)
        self._file_handler = handler

    def log(self, level: int, task_id: str, message: str):
        self._logger.log(level, message, extra={'task_id': task_id})

    def task_started(self, task_id: str, task_type: str, index: int):
        self.log(logging.DEBUG, task_id, f"{task_type}#{index} started")

    def task_progress(self, task_id: str, progress: float, status: str):
        self.log(logging.DEBUG, task_id, f"{progress:5.1f}% {status}".rstrip())

    def task_completed(self, task_id: str, task_type: str, elapsed: Optional[float] = None):
        took = f" in {format_time(elapsed)}" if elapsed is not None else ""
        self.log(logging.DEBUG, task_id, f"{task_type} completed{took}")

    def task_failed(self, task_id: str, error: BaseException):
        # numerical failures are expected outcomes (slip, stalled Newton); input errors are not
        level = logging.INFO if isinstance(error, RuntimeError) else logging.ERROR
        self.log(level, task_id, f"failed: {type(error).__name__}: {error}")
