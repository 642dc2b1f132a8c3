"""Abstract executor client and deterministic mock."""

from __future__ import annotations

import hashlib
import threading
from abc import ABC, abstractmethod
from collections.abc import Iterable

from flow_tailor.exceptions import ExecutionFailedError
from flow_tailor.models import GenerationJob, ImageHandle


class ExecutorClient(ABC):
    """Runs one prompt-bound flow and returns a handle to its image."""

    @abstractmethod
    def generate(self, job: GenerationJob) -> ImageHandle:
        """Execute a job.

        Raises:
            ExecutorUnavailableError: The executor cannot be reached.
            ExecutionFailedError: A node failed during execution.
            ExecutorTimeoutError: The job did not finish in time.
        """
        ...


class MockExecutorClient(ExecutorClient):
    """Executor that hashes (prompt, flow, seed) into a synthetic handle.

    ``fail_pairs`` and ``missing_models`` inject failures for testing.
    """

    def __init__(
        self,
        fail_pairs: Iterable[tuple[str, str]] = (),
        missing_models: Iterable[str] = (),
    ) -> None:
        self.fail_pairs = set(fail_pairs)
        self.missing_models = set(missing_models)
        self.calls: list[tuple[str, str, int]] = []
        self._lock = threading.Lock()

    def generate(self, job: GenerationJob) -> ImageHandle:
        with self._lock:
            self.calls.append((job.prompt_id, job.flow_id, job.seed))

        graph = job.resolved_graph
        for node_id in sorted(graph.nodes):
            for _, value in sorted(graph.nodes[node_id].literals()):
                if isinstance(value, str) and value in self.missing_models:
                    raise ExecutionFailedError(node_id, f"Model not found: {value}")
        if (job.prompt_id, job.flow_id) in self.fail_pairs:
            raise ExecutionFailedError(None, "Injected failure")

        material = f"{job.prompt_id}\x00{job.flow_id}\x00{job.seed}".encode()
        digest = hashlib.blake2b(material, digest_size=16).hexdigest()
        return ImageHandle(
            prompt_id=job.prompt_id,
            flow_id=job.flow_id,
            seed=job.seed,
            location=f"mock://{digest}.png",
        )
