"""Score-conditioned flow prediction agent."""

from __future__ import annotations

import json
from collections.abc import Sequence
from typing import Any

from flow_tailor.agents.base import BaseAgent
from flow_tailor.enums import SelectionMethod
from flow_tailor.exceptions import FlowParseError, InvalidFlowError, NoJsonFoundError
from flow_tailor.graph import WorkflowGraph, flow_id_for, nearest_neighbor, parse_flow
from flow_tailor.llm.base import LLMClient
from flow_tailor.models import SelectionResult


def extract_json_object(text: str) -> str:
    """Return the first decodable JSON object embedded in ``text``.

    Raises:
        NoJsonFoundError: If the text holds no JSON object.
    """
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(value, dict):
            return text[start:end]
        start = text.find("{", end)
    raise NoJsonFoundError(f"No JSON object in response: {text[:200]!r}")


def parse_ft_response(
    text: str,
    corpus: Sequence[tuple[str, WorkflowGraph]],
    prompt_id: str = "",
) -> SelectionResult:
    """Parse a predicted flow and locate its nearest corpus neighbor.

    The result keeps the parsed graph; ``flow_id`` is the neighbor's id when
    the prediction matches it exactly (similarity 1.0), else a content hash.

    Raises:
        NoJsonFoundError: No JSON object in the text.
        InvalidFlowError: The JSON is not a valid flow.
        EmptyCorpusError: The corpus is empty.
    """
    payload = extract_json_object(text)
    try:
        graph = parse_flow(payload)
    except FlowParseError as exc:
        raise InvalidFlowError(str(exc)) from exc
    neighbor_id, similarity = nearest_neighbor(graph, corpus)
    flow_id = neighbor_id if similarity == 1.0 else flow_id_for(graph)
    return SelectionResult(
        prompt_id=prompt_id,
        flow_id=flow_id,
        method=SelectionMethod.fine_tuned,
        graph=graph,
        resolved_graph=graph,
        neighbor_id=neighbor_id,
        neighbor_similarity=similarity,
    )


class FlowPredictionAgent(BaseAgent):
    """Asks a score-conditioned LLM for a flow JSON."""

    max_retries = 3
    retryable_errors = (NoJsonFoundError, InvalidFlowError)
    correction_prompt = "Output only one complete ComfyUI workflow as a JSON object."

    def __init__(
        self,
        llm: LLMClient,
        corpus: Sequence[tuple[str, WorkflowGraph]],
        **kwargs: Any,
    ) -> None:
        super().__init__(llm, **kwargs)
        self.corpus = corpus

    @property
    def system_prompt(self) -> str:
        return ""

    def build_user_prompt(self, **kwargs: Any) -> str:
        return kwargs["instruction"]

    def parse_response(self, raw: str) -> SelectionResult:
        return parse_ft_response(self._strip_json_fences(raw), self.corpus)
