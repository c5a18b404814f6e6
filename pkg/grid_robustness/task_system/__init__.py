"""Task management system for grid-robustness."""

from .base_task import Task, TaskStatus
from .task_queue import TaskQueue
from .task_worker import TaskWorker, ProgressReporter
from .task_manager import TaskManager
from .task_logger import TaskLogger
from .task_utils import format_time, split_batches

__all__ = [
    'Task',
    'TaskStatus',
    'TaskQueue',
    'TaskWorker',
    'ProgressReporter',
    'TaskManager',
    'TaskLogger',
    'format_time',
    'split_batches',
]
