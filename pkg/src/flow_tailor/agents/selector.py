"""In-context flow selection agent."""

from __future__ import annotations

import re
from collections.abc import Iterable
from typing import Any

from flow_tailor.agents.base import BaseAgent
from flow_tailor.exceptions import NoValidFlowIdError
from flow_tailor.llm.base import LLMClient
from flow_tailor.templates import render_selection_prompt

_FLOW_ID_LINE = re.compile(r"flow[\s_-]*id\s*[:#=\-]?\s*[*`'\"]*\s*([\w.\-]+)", re.IGNORECASE)
_TOKEN = re.compile(r"[\w.\-]+")
_EXPLANATION = re.compile(r"explanation\s*[:\-]\s*(.*)", re.IGNORECASE | re.DOTALL)


def parse_selection_reply(raw: str, valid_ids: Iterable[str]) -> tuple[str, str | None]:
    """Return (flow_id, explanation) from a selection reply.

    When the reply carries a ``Flow ID:`` label, the first labelled id that is
    in the table is used and free mentions are ignored. Only an unlabelled
    reply falls back to the first valid id mentioned anywhere.

    Raises:
        NoValidFlowIdError: If no valid id is named, or every labelled id is invalid.
    """
    valid = set(valid_ids)
    labelled = [m.group(1).rstrip(".-") for m in _FLOW_ID_LINE.finditer(raw)]
    if labelled:
        candidates = labelled
    else:
        candidates = [token.rstrip(".-") for token in _TOKEN.findall(raw)]
    flow_id = next((c for c in candidates if c in valid), None)
    if flow_id is None:
        raise NoValidFlowIdError(f"Reply names no flow from the table: {raw[:200]!r}")

    explanation: str | None = None
    if match := _EXPLANATION.search(raw):
        explanation = match.group(1).strip() or None
    return flow_id, explanation


class InContextSelectionAgent(BaseAgent):
    """Asks an LLM to pick a flow id given the rendered score table."""

    max_retries = 2
    retryable_errors = (NoValidFlowIdError,)
    correction_prompt = (
        "Your answer did not name a flow ID from the table. "
        "Reply with 'Flow ID: <id>' followed by a brief explanation."
    )

    def __init__(self, llm: LLMClient, valid_ids: Iterable[str], **kwargs: Any) -> None:
        super().__init__(llm, **kwargs)
        self.valid_ids = sorted(valid_ids)

    @property
    def system_prompt(self) -> str:
        return ""

    def build_user_prompt(self, **kwargs: Any) -> str:
        return render_selection_prompt(kwargs["context"], kwargs["prompt_text"])

    def parse_response(self, raw: str) -> tuple[str, str | None]:
        return parse_selection_reply(raw, self.valid_ids)
