"""Abstract base class and mock implementation for LLM clients."""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from typing import Any

import httpx

from flow_tailor.exceptions import LLMError


class LLMClient(ABC):
    """Abstract base for LLM provider clients."""

    @abstractmethod
    def generate(
        self,
        system_prompt: str,
        user_prompt: str,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        """Generate a text response from the LLM.

        Args:
            system_prompt: System-level instruction; may be empty.
            user_prompt: User-level prompt to respond to.
            temperature: Sampling temperature.
            max_tokens: Upper bound on generated tokens, or None for the server default.

        Returns:
            The generated text response.

        Raises:
            LLMError: On communication failures or unexpected responses.
        """
        ...


def post_json(
    url: str,
    payload: dict[str, Any],
    *,
    service: str,
    timeout: float,
    headers: dict[str, str] | None = None,
) -> Any:
    """POST ``payload`` and return the decoded JSON body.

    Raises:
        LLMError: On timeouts, HTTP errors, transport failures, or a non-JSON body.
    """
    try:
        resp = httpx.post(url, json=payload, headers=headers or {}, timeout=timeout)
        resp.raise_for_status()
    except httpx.TimeoutException as exc:
        raise LLMError(f"{service} request timed out ({url}): {exc}") from exc
    except httpx.HTTPStatusError as exc:
        raise LLMError(
            f"{service} returned HTTP {exc.response.status_code}: {exc.response.text[:200]}"
        ) from exc
    except httpx.HTTPError as exc:
        raise LLMError(f"{service} request failed ({url}): {exc}") from exc

    try:
        return resp.json()
    except ValueError as exc:
        raise LLMError(f"{service} returned invalid JSON: {resp.text[:200]}") from exc


class MockLLMClient(LLMClient):
    """Mock LLM client that cycles through predefined responses.

    Useful for testing.
    """

    def __init__(self, responses: list[str]) -> None:
        self._responses = responses
        self._index = 0
        self._lock = threading.Lock()
        self.calls: list[tuple[str, str]] = []

    def generate(
        self,
        system_prompt: str,
        user_prompt: str,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        """Return the next predefined response and record the call."""
        with self._lock:
            self.calls.append((system_prompt, user_prompt))
            response = self._responses[self._index % len(self._responses)]
            self._index += 1
        return response
