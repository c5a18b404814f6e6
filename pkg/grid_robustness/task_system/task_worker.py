import asyncio
import time
from concurrent.futures import Executor
from typing import Dict, Any, Callable, Optional

from .base_task import Task, TaskStatus
from .task_logger import TaskLogger


class TaskWorker:
    """Runs synchronous numerical handlers off the event loop."""

    def __init__(self, executor: Optional[Executor] = None):
        self._handlers: Dict[str, Callable[[Task], Any]] = {}
        self._executor = executor
        self._logger = TaskLogger.get_instance()

    def register_handler(self, task_type: str, handler: Callable[[Task], Any]):
        """Register a handler for a specific task type."""
        self._handlers[task_type] = handler

    def has_handler(self, task_type: str) -> bool:
        return task_type in self._handlers

    async def execute(self, task: Task) -> Any:
        """Execute a task using its registered handler."""
        if task.type not in self._handlers:
            raise ValueError(f"No handler registered for task type: {task.type}")

        handler = self._handlers[task.type]
        loop = asyncio.get_running_loop()
        try:
            task.status = TaskStatus.RUNNING
            self._logger.task_started(task.id, task.type, task.index)
            result = await loop.run_in_executor(self._executor, handler, task)
            task.status = TaskStatus.COMPLETED
            task.result = result
            task.progress = 100.0
            elapsed = time.time() - task.started_at if task.started_at is not None else None
            self._logger.task_completed(task.id, task.type, elapsed)
            return result
        except asyncio.CancelledError:
            task.status = TaskStatus.CANCELLED
            raise
        except Exception as e:
            task.status = TaskStatus.FAILED
            task.error = e
            self._logger.task_failed(task.id, e)
            raise


class ProgressReporter:
    def __init__(self, task: Task):
        self.task = task
        self._logger = TaskLogger.get_instance()

    def update(self, progress: float, message: str = ""):
        """Update task progress (0-100)."""
        self.task.progress = min(max(progress, 0), 100)
        self._logger.task_progress(self.task.id, self.task.progress, message)
