"""LLM client abstractions and implementations."""

from flow_tailor.llm.base import LLMClient, MockLLMClient

__all__ = ["LLMClient", "MockLLMClient"]
