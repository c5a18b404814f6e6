"""Task queue implementation."""

import asyncio
import time
from typing import Dict, List, Optional, Any

from .base_task import Task, TaskStatus
from .task_worker import TaskWorker


class TaskQueue:
    """Feeds queued tasks to a TaskWorker with at most max_concurrent running at once."""

    def __init__(self, worker: TaskWorker, max_concurrent: int = 3):
        if max_concurrent < 1:
            raise ValueError("max_concurrent must be at least 1")
        self.tasks: Dict[str, Task] = {}
        self.queue: asyncio.Queue[Task] = asyncio.Queue()
        self.max_concurrent = max_concurrent
        self.running_tasks: Dict[str, asyncio.Task] = {}
        self.worker = worker
        self._slots = asyncio.Semaphore(max_concurrent)
        self._worker_task: Optional[asyncio.Task] = None

    async def start(self):
        """Start the task queue worker."""
        self._worker_task = asyncio.create_task(self._worker())

    async def stop(self):
        """Stop the task queue worker and cancel anything still running."""
        if self._worker_task:
            self._worker_task.cancel()
            try:
                await self._worker_task
            except asyncio.CancelledError:
                pass
            self._worker_task = None
        for runner in list(self.running_tasks.values()):
            runner.cancel()
        if self.running_tasks:
            await asyncio.gather(*self.running_tasks.values(), return_exceptions=True)

    async def add_task(self, task_type: str, params: Dict[str, Any]) -> Task:
        """Add a new task to the queue."""
        task = Task(task_type, params, index=len(self.tasks))
        self.tasks[task.id] = task
        await self.queue.put(task)
        return task

    async def join(self):
        """Wait until every queued task has finished."""
        await self.queue.join()

    def list_tasks(self, status: Optional[TaskStatus] = None) -> List[Task]:
        """List all tasks in submission order, optionally filtered by status."""
        tasks = sorted(self.tasks.values(), key=lambda t: t.index)
        if status:
            tasks = [t for t in tasks if t.status == status]
        return tasks

    async def _worker(self):
        """Main worker loop processing tasks from the queue."""
        while True:
            task = await self.queue.get()
            if task.status != TaskStatus.PENDING:
                self.queue.task_done()
                continue
            await self._slots.acquire()
            runner = asyncio.create_task(self._run_task(task))
            self.running_tasks[task.id] = runner

    async def _run_task(self, task: Task):
        """Execute a single task."""
        task.started_at = time.time()
        try:
            await self.worker.execute(task)
        except asyncio.CancelledError:
            task.status = TaskStatus.CANCELLED
        except Exception as e:
            task.status = TaskStatus.FAILED
            task.error = e
        finally:
            task.completed_at = time.time()
            self.running_tasks.pop(task.id, None)
            self._slots.release()
            self.queue.task_done()
