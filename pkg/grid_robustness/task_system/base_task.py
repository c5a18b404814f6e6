"""Base task interface for the task system."""
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, Any, Optional
from enum import Enum


class TaskStatus(Enum):
    """Task status enum."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass
class Task:
    """A unit of numerical work: one gain column batch, one seed, one scenario."""
    type: str
    params: Dict[str, Any]
    index: int = 0  # submission order, used to return results deterministically
    id: str = field(default_factory=lambda: str(uuid.uuid4()))
    status: TaskStatus = TaskStatus.PENDING
    progress: float = 0.0
    error: Optional[BaseException] = None
    result: Any = None
    created_at: float = field(default_factory=time.time)
    started_at: Optional[float] = None
    completed_at: Optional[float] = None

    @property
    def elapsed(self) -> Optional[float]:
        if self.started_at is None or self.completed_at is None:
            return None
        return self.completed_at - self.started_at

    def to_dict(self) -> Dict[str, Any]:
        """Convert task to dictionary."""
        return {
            "id": self.id,
            "type": self.type,
            "index": self.index,
            "status": self.status.value,
            "progress": self.progress,
            "error": str(self.error) if self.error else None,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "completed_at": self.completed_at,
        }
