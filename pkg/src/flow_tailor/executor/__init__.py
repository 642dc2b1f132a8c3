"""Image generation executors."""

from flow_tailor.executor.base import ExecutorClient, MockExecutorClient

__all__ = ["ExecutorClient", "MockExecutorClient"]
