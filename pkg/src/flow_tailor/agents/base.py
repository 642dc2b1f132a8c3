"""Abstract base agent with LLM integration and bounded reprompting."""

from __future__ import annotations

import json
import logging
import re
from abc import ABC, abstractmethod
from typing import Any

from flow_tailor.llm.base import LLMClient

logger = logging.getLogger(__name__)


class BaseAgent(ABC):
    """Base class for LLM-backed agents.

    ``run`` builds a prompt, calls the LLM and parses the reply. A parse
    failure of one of ``retryable_errors`` reprompts with
    ``correction_prompt`` up to ``max_retries`` times, then re-raises.
    """

    max_retries: int = 1
    retryable_errors: tuple[type[Exception], ...] = (json.JSONDecodeError,)
    correction_prompt = "Your response was not valid JSON. Please output only valid JSON."

    def __init__(
        self,
        llm: LLMClient,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> None:
        self.llm = llm
        self.temperature = temperature
        self.max_tokens = max_tokens

    @property
    @abstractmethod
    def system_prompt(self) -> str:
        """Return the system prompt for this agent."""
        ...

    @abstractmethod
    def build_user_prompt(self, **kwargs: Any) -> str:
        """Build the user prompt from keyword arguments."""
        ...

    @abstractmethod
    def parse_response(self, raw: str) -> Any:
        """Parse the raw LLM response into structured data."""
        ...

    def _strip_json_fences(self, raw: str) -> str:
        """Remove markdown code fences from LLM output."""
        stripped = raw.strip()
        stripped = re.sub(r"^```(?:json)?\s*\n?", "", stripped)
        stripped = re.sub(r"\n?```\s*$", "", stripped)
        return stripped.strip()

    def run(self, **kwargs: Any) -> Any:
        """Execute the agent.

        Raises:
            LLMError: If the LLM call fails.
            Exception: The last parse error once retries are exhausted.
        """
        user_prompt = self.build_user_prompt(**kwargs)
        prompt = user_prompt
        for attempt in range(self.max_retries + 1):
            raw = self.llm.generate(
                self.system_prompt, prompt, temperature=self.temperature, max_tokens=self.max_tokens
            )
            try:
                return self.parse_response(raw)
            except self.retryable_errors as exc:
                if attempt == self.max_retries:
                    raise
                logger.warning(
                    "%s reply unusable (attempt %d): %s", type(self).__name__, attempt + 1, exc
                )
                prompt = f"{user_prompt}\n\n{self.correction_prompt}"
        raise AssertionError("unreachable")
