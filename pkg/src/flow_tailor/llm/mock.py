"""Deterministic offline LLM for hermetic pipeline runs."""

from __future__ import annotations

import hashlib
import re
from collections.abc import Sequence

from flow_tailor.exceptions import LLMError
from flow_tailor.graph import WorkflowGraph, serialize_flow
from flow_tailor.labeling import DEFAULT_LABELS, KeywordLabeler
from flow_tailor.llm.base import LLMClient

_IMAGE_PROMPT = re.compile(r"Image prompt: (.*?)\n\nAvailable labels: (.*?)\n", re.DOTALL)


def _pick(key: str, count: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % count


class OfflineLLMClient(LLMClient):
    """Answers the three request shapes the pipeline sends, without a model.

    Flow prediction requests echo a corpus flow chosen by hashing the
    request; selection requests name a flow row from the context table;
    labeling requests are answered by keyword matching.
    """

    def __init__(self, corpus: Sequence[tuple[str, WorkflowGraph]] = ()) -> None:
        self.corpus = sorted(corpus, key=lambda item: item[0])
        self.keywords = KeywordLabeler()
        self.calls: list[tuple[str, str]] = []

    def generate(
        self,
        system_prompt: str,
        user_prompt: str,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        self.calls.append((system_prompt, user_prompt))
        if ">>> Flow:" in user_prompt:
            return self._predict_flow(user_prompt)
        if "classify the following prompt" in user_prompt:
            return self._select_flow(user_prompt)
        if user_prompt.rstrip().endswith("Selected labels:"):
            return self._label(user_prompt)
        raise LLMError("Offline LLM cannot answer this request")

    def _predict_flow(self, user_prompt: str) -> str:
        if not self.corpus:
            raise LLMError("Offline LLM has no corpus to predict from")
        _, graph = self.corpus[_pick(user_prompt, len(self.corpus))]
        return f"```json\n{serialize_flow(graph)}\n```"

    def _select_flow(self, user_prompt: str) -> str:
        context = user_prompt.split("\n\nPlease classify", 1)[0]
        rows = [line.split(" | ", 1)[0] for line in context.splitlines()[1:] if " | " in line]
        if not rows:
            raise LLMError("Offline LLM found no flow rows in the context")
        flow_id = rows[_pick(user_prompt, len(rows))]
        return f"Flow ID: {flow_id}\nExplanation: highest listed scores for this prompt's themes."

    def _label(self, user_prompt: str) -> str:
        match = _IMAGE_PROMPT.search(user_prompt)
        if match is None:
            return ""
        vocabulary = [v.strip() for v in match.group(2).split(",")] or DEFAULT_LABELS
        return self.keywords.label(match.group(1), vocabulary)
