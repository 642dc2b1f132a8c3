"""Executor backed by a ComfyUI-compatible HTTP server."""

from __future__ import annotations

import logging
import os
import time
from pathlib import Path
from typing import Any
from uuid import uuid4

import httpx

from flow_tailor.exceptions import (
    ExecutionFailedError,
    ExecutorError,
    ExecutorTimeoutError,
    ExecutorUnavailableError,
)
from flow_tailor.executor.base import ExecutorClient
from flow_tailor.models import GenerationJob, ImageHandle

logger = logging.getLogger(__name__)


class ComfyExecutorClient(ExecutorClient):
    """Queue flows on ``/prompt``, poll ``/history`` and download from ``/view``."""

    def __init__(
        self,
        base_url: str,
        output_dir: Path,
        token_env: str = "FLOWTAILOR_EXECUTOR_TOKEN",
        timeout: float = 600.0,
        poll_interval: float = 1.0,
        retries: int = 3,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.output_dir = output_dir
        self.token = os.environ.get(token_env, "")
        self.timeout = timeout
        self.poll_interval = poll_interval
        self.retries = retries
        self.client_id = uuid4().hex

    def _headers(self) -> dict[str, str]:
        if not self.token:
            return {}
        return {"Authorization": f"Bearer {self.token}"}

    def _request(self, method: str, path: str, **kwargs: Any) -> httpx.Response:
        url = f"{self.base_url}{path}"
        last_exc: Exception | None = None
        for attempt in range(1, self.retries + 1):
            try:
                if method == "POST":
                    resp = httpx.post(url, headers=self._headers(), timeout=30.0, **kwargs)
                else:
                    resp = httpx.get(url, headers=self._headers(), timeout=30.0, **kwargs)
                resp.raise_for_status()
                return resp
            except httpx.TimeoutException as exc:
                raise ExecutorTimeoutError(30.0) from exc
            except httpx.HTTPStatusError:
                raise
            except httpx.HTTPError as exc:
                last_exc = exc
                logger.warning("Executor request %s failed (attempt %d): %s", url, attempt, exc)
        raise ExecutorUnavailableError(f"Executor unreachable at {url}: {last_exc}") from last_exc

    def _queue(self, job: GenerationJob) -> str:
        payload = {"prompt": job.resolved_graph.to_api_dict(), "client_id": self.client_id}
        try:
            resp = self._request("POST", "/prompt", json=payload)
        except httpx.HTTPStatusError as exc:
            raise _rejection_error(exc.response) from exc
        try:
            return str(resp.json()["prompt_id"])
        except (ValueError, KeyError) as exc:
            raise ExecutorError(f"Unexpected /prompt response: {resp.text[:200]}") from exc

    def _wait(self, queue_id: str) -> dict[str, Any]:
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                resp = self._request("GET", f"/history/{queue_id}")
                history = resp.json()
            except httpx.HTTPStatusError as exc:
                raise ExecutorError(
                    f"Executor returned HTTP {exc.response.status_code}: "
                    f"{exc.response.text[:200]}"
                ) from exc
            except ValueError as exc:
                raise ExecutorError(f"Executor returned invalid JSON for {queue_id}") from exc

            entry = history.get(queue_id)
            if entry:
                status = entry.get("status", {})
                if status.get("status_str") == "error":
                    raise _execution_error(status.get("messages", []))
                if status.get("completed", True):
                    return entry.get("outputs", {})
            if time.monotonic() >= deadline:
                raise ExecutorTimeoutError(self.timeout)
            time.sleep(self.poll_interval)

    def generate(self, job: GenerationJob) -> ImageHandle:
        """Run a job to completion and save its first output image."""
        queue_id = self._queue(job)
        logger.debug("Queued %s/%s as %s", job.prompt_id, job.flow_id, queue_id)
        outputs = self._wait(queue_id)

        image = _first_image(outputs)
        if image is None:
            raise ExecutionFailedError(None, "Flow produced no image output")
        params = {
            "filename": image["filename"],
            "subfolder": image.get("subfolder", ""),
            "type": image.get("type", "output"),
        }
        try:
            resp = self._request("GET", "/view", params=params)
        except httpx.HTTPStatusError as exc:
            raise ExecutorError(
                f"Could not download {image['filename']}: HTTP {exc.response.status_code}"
            ) from exc

        suffix = Path(image["filename"]).suffix or ".png"
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / f"{job.prompt_id}__{job.flow_id}__{job.seed}{suffix}"
        path.write_bytes(resp.content)
        return ImageHandle(
            prompt_id=job.prompt_id, flow_id=job.flow_id, seed=job.seed, location=str(path)
        )


def _first_image(outputs: dict[str, Any]) -> dict[str, Any] | None:
    for node_id in sorted(outputs):
        images = outputs[node_id].get("images") or []
        if images:
            return images[0]
    return None


def _rejection_error(response: httpx.Response) -> ExecutorError:
    try:
        body = response.json()
    except ValueError:
        detail = response.text[:200]
        return ExecutorError(f"Executor returned HTTP {response.status_code}: {detail}")
    node_errors = body.get("node_errors") or {}
    for node_id in sorted(node_errors):
        errors = node_errors[node_id].get("errors") or [{}]
        first = errors[0]
        message = first.get("message", "invalid node")
        details = first.get("details")
        return ExecutionFailedError(node_id, f"{message}: {details}" if details else message)
    error = body.get("error") or {}
    message = error.get("message") if isinstance(error, dict) else str(error)
    return ExecutionFailedError(None, message or f"HTTP {response.status_code}")


def _execution_error(messages: list[Any]) -> ExecutionFailedError:
    for message in messages:
        if isinstance(message, list) and len(message) == 2 and message[0] == "execution_error":
            info = message[1] or {}
            node_id = info.get("node_id")
            return ExecutionFailedError(
                str(node_id) if node_id is not None else None,
                info.get("exception_message", "execution error"),
            )
    return ExecutionFailedError(None, "; ".join(str(m) for m in messages) or "Unknown error")
