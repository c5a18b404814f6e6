"""Utility functions for task management."""


def format_time(seconds: float) -> str:
    """Format seconds to human readable string."""
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.2f}s"
    minutes = seconds / 60
    if minutes < 60:
        return f"{minutes:.1f}m"
    hours = minutes / 60
    return f"{hours:.1f}h"


def split_batches(count: int, batch_size: int) -> list[range]:
    """Split range(count) into consecutive ranges of at most batch_size."""
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    return [range(start, min(start + batch_size, count)) for start in range(0, count, batch_size)]
