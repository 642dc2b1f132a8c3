"""Tests for flow_tailor.llm.mock."""

import pytest

from flow_tailor.agents.predictor import parse_ft_response
from flow_tailor.exceptions import LLMError
from flow_tailor.labeling import DEFAULT_LABELS, render_labeling_prompt
from flow_tailor.llm.mock import OfflineLLMClient
from flow_tailor.models import PromptRecord, TargetScore
from flow_tailor.selection import build_ft_request
from flow_tailor.templates import render_selection_prompt

CONTEXT = "flow_id | Anime\nanime_vae | 0.800\nlora_detail | 0.500\n"


def _ft_request() -> str:
    return build_ft_request(PromptRecord(prompt_id="p", text="a cat"), TargetScore(value=0.7))


class TestOfflineLLMClient:
    def test_predicts_a_corpus_flow(self, templates):
        llm = OfflineLLMClient(templates)
        request = _ft_request()

        reply = llm.generate("", request)

        result = parse_ft_response(reply, templates)
        assert result.neighbor_similarity == 1.0
        assert result.flow_id in dict(templates)

    def test_prediction_is_deterministic(self, templates):
        request = _ft_request()
        first = OfflineLLMClient(templates).generate("", request)
        second = OfflineLLMClient(list(reversed(templates))).generate("", request)
        assert first == second

    def test_prediction_needs_corpus(self):
        request = _ft_request()
        with pytest.raises(LLMError, match="no corpus"):
            OfflineLLMClient().generate("", request)

    def test_selects_a_context_row(self):
        reply = OfflineLLMClient().generate("", render_selection_prompt(CONTEXT, "a cat"))
        assert reply.splitlines()[0] in {"Flow ID: anime_vae", "Flow ID: lora_detail"}

    def test_selection_needs_rows(self):
        with pytest.raises(LLMError, match="no flow rows"):
            OfflineLLMClient().generate("", render_selection_prompt("flow_id | Anime", "a cat"))

    def test_labels_by_keyword(self):
        request = render_labeling_prompt("anime girl riding a dragon", DEFAULT_LABELS)
        reply = OfflineLLMClient().generate("", request)
        assert reply == "People, Fantasy, Anime"

    def test_unknown_request(self):
        llm = OfflineLLMClient()
        with pytest.raises(LLMError, match="cannot answer"):
            llm.generate("", "What is the capital of France?")
        assert llm.calls == [("", "What is the capital of France?")]
