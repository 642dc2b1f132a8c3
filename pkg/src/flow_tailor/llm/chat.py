"""Client for a chat-completion style text endpoint."""

from __future__ import annotations

import os
from typing import Any

from flow_tailor.exceptions import LLMError
from flow_tailor.llm.base import LLMClient, post_json


class ChatCompletionClient(LLMClient):
    """POSTs ``{system, user, max_tokens, temperature}`` and reads ``{text}``."""

    def __init__(
        self,
        url: str,
        api_key_env: str = "FLOWTAILOR_LLM_API_KEY",
        default_max_tokens: int = 4096,
        timeout: float = 300.0,
    ) -> None:
        self.url = url
        self.api_key = os.environ.get(api_key_env, "")
        self.default_max_tokens = default_max_tokens
        self.timeout = timeout

    def generate(
        self,
        system_prompt: str,
        user_prompt: str,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        payload: dict[str, Any] = {
            "user": user_prompt,
            "max_tokens": max_tokens or self.default_max_tokens,
            "temperature": temperature,
        }
        if system_prompt:
            payload["system"] = system_prompt
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}

        data = post_json(
            self.url, payload, service="LLM endpoint", timeout=self.timeout, headers=headers
        )
        if not isinstance(data, dict) or not isinstance(data.get("text"), str):
            raise LLMError(f"LLM response missing 'text' field: {str(data)[:200]}")
        return data["text"]
