"""Task manager implementation."""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Any, Callable, List, Optional

from .. import config, utils
from .base_task import Task, TaskStatus
from .task_queue import TaskQueue
from .task_worker import TaskWorker
from .task_utils import format_time


class TaskManager:
    """Runs batches of independent numerical tasks and returns results in submission order."""
    _instance = None

    def __init__(self):
        """Initialize task manager."""
        if TaskManager._instance is not None:
            raise RuntimeError("TaskManager is a singleton. Use get_instance() instead.")
        self._handlers: Dict[str, Callable[[Task], Any]] = {}

    @classmethod
    def get_instance(cls) -> 'TaskManager':
        """Get singleton instance."""
        if cls._instance is None:
            cls._instance = TaskManager()
        return cls._instance

    def register_handler(self, task_type: str, handler: Callable[[Task], Any]):
        """Register the handler executed for tasks of task_type."""
        self._handlers[task_type] = handler

    def has_handler(self, task_type: str) -> bool:
        return task_type in self._handlers

    async def run_all(self, task_type: str, params_list: List[Dict[str, Any]], max_concurrent: Optional[int] = None) -> List[Task]:
        """Queue one task per params entry and wait for all of them."""
        if task_type not in self._handlers:
            raise ValueError(f"No handler registered for task type: {task_type}")
        max_concurrent = max_concurrent or config.MAX_CONCURRENT_TASKS

        with ThreadPoolExecutor(max_workers=max_concurrent) as executor:
            worker = TaskWorker(executor)
            worker.register_handler(task_type, self._handlers[task_type])
            queue = TaskQueue(worker, max_concurrent=max_concurrent)
            await queue.start()
            try:
                for params in params_list:
                    await queue.add_task(task_type, params)
                await queue.join()
            finally:
                await queue.stop()
        return queue.list_tasks()

    def run_batch(self, task_type: str, params_list: List[Dict[str, Any]], max_concurrent: Optional[int] = None) -> List[Any]:
        """Synchronous entry point; re-raises the first failure in submission order."""
        if not params_list:
            return []
        try:
            asyncio.get_running_loop()
            in_loop = True
        except RuntimeError:
            in_loop = False

        if in_loop or len(params_list) == 1 or (max_concurrent or config.MAX_CONCURRENT_TASKS) == 1:
            # Already inside an event loop (or nothing to parallelize): run in this thread.
            tasks = [Task(task_type, params, index=i) for i, params in enumerate(params_list)]
            for task in tasks:
                task.result = self._handlers[task_type](task)
                task.status = TaskStatus.COMPLETED
            return [task.result for task in tasks]

        tasks = asyncio.run(self.run_all(task_type, params_list, max_concurrent))
        for task in tasks:
            if task.status != TaskStatus.COMPLETED:
                raise task.error if task.error is not None else RuntimeError(f"Task {task.id} did not complete ({task.status.value})")
        elapsed = sum(task.elapsed or 0.0 for task in tasks)
        utils.print_debug(f"{len(tasks)} '{task_type}' tasks finished, {format_time(elapsed)} of worker time")
        return [task.result for task in tasks]
