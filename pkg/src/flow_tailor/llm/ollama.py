"""Ollama LLM client."""

from __future__ import annotations

import os
from typing import Any

from flow_tailor.exceptions import LLMError
from flow_tailor.llm.base import LLMClient, post_json


class OllamaClient(LLMClient):
    """Talks to a local or remote Ollama server through ``/api/generate``.

    ``keep_alive`` is forwarded as-is so a long selection batch can pin the
    model in memory between requests.
    """

    def __init__(
        self,
        model: str = "llama3.1",
        host: str | None = None,
        timeout: float = 300.0,
        keep_alive: str | None = None,
    ) -> None:
        self.model = model
        self.host = (host or os.environ.get("OLLAMA_HOST", "http://localhost:11434")).rstrip("/")
        self.timeout = timeout
        self.keep_alive = keep_alive

    def generate(
        self,
        system_prompt: str,
        user_prompt: str,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        options: dict[str, float | int] = {"temperature": temperature}
        if max_tokens is not None:
            options["num_predict"] = max_tokens
        payload: dict[str, Any] = {
            "model": self.model,
            "system": system_prompt,
            "prompt": user_prompt,
            "stream": False,
            "options": options,
        }
        if self.keep_alive is not None:
            payload["keep_alive"] = self.keep_alive

        data = post_json(
            f"{self.host}/api/generate", payload, service="Ollama", timeout=self.timeout
        )
        if not isinstance(data, dict) or "response" not in data:
            keys = list(data) if isinstance(data, dict) else type(data).__name__
            raise LLMError(f"Ollama response missing 'response' key: {keys}")
        return data["response"]
