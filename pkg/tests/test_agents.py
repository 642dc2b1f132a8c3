"""Tests for flow_tailor.agents."""

import json
from typing import Any

import pytest

from flow_tailor.agents.base import BaseAgent
from flow_tailor.agents.predictor import (
    FlowPredictionAgent,
    extract_json_object,
    parse_ft_response,
)
from flow_tailor.agents.selector import InContextSelectionAgent, parse_selection_reply
from flow_tailor.enums import SelectionMethod
from flow_tailor.exceptions import (
    EmptyCorpusError,
    InvalidFlowError,
    LLMError,
    NoJsonFoundError,
    NoValidFlowIdError,
)
from flow_tailor.graph import flow_id_for, serialize_flow
from flow_tailor.llm.base import LLMClient, MockLLMClient


class _JsonAgent(BaseAgent):
    """Minimal concrete agent for exercising the retry loop."""

    @property
    def system_prompt(self) -> str:
        return "Reply in JSON."

    def build_user_prompt(self, **kwargs: Any) -> str:
        return f"Topic: {kwargs['topic']}"

    def parse_response(self, raw: str) -> dict:
        return json.loads(self._strip_json_fences(raw))


class _FailingLLM(LLMClient):
    def generate(self, system_prompt, user_prompt, temperature=0.0, max_tokens=None):
        raise LLMError("connection refused")


# ---------------------------------------------------------------------------
# Base agent
# ---------------------------------------------------------------------------


class TestBaseAgent:
    def test_parses_fenced_json(self):
        llm = MockLLMClient(['```json\n{"a": 1}\n```'])
        assert _JsonAgent(llm).run(topic="x") == {"a": 1}
        assert llm.calls == [("Reply in JSON.", "Topic: x")]

    def test_reprompts_once_with_correction(self):
        llm = MockLLMClient(["not json", '{"a": 2}'])

        assert _JsonAgent(llm).run(topic="x") == {"a": 2}

        assert len(llm.calls) == 2
        assert llm.calls[1][1].startswith("Topic: x\n\n")
        assert "valid JSON" in llm.calls[1][1]

    def test_raises_after_retries(self):
        llm = MockLLMClient(["nope"])
        with pytest.raises(json.JSONDecodeError):
            _JsonAgent(llm).run(topic="x")
        assert len(llm.calls) == 2

    def test_llm_error_not_retried(self):
        with pytest.raises(LLMError):
            _JsonAgent(_FailingLLM()).run(topic="x")


# ---------------------------------------------------------------------------
# Selection replies
# ---------------------------------------------------------------------------

VALID = ["anime_vae", "lora_detail", "portrait_facefix"]


class TestParseSelectionReply:
    def test_explicit_flow_id(self):
        reply = "Flow ID: lora_detail\nExplanation: strong on urban scenes."
        assert parse_selection_reply(reply, VALID) == ("lora_detail", "strong on urban scenes.")

    @pytest.mark.parametrize(
        "reply",
        [
            "**Flow ID:** `anime_vae`",
            "flow_id = anime_vae.",
            "FlowID #anime_vae",
        ],
    )
    def test_flow_id_variants(self, reply):
        assert parse_selection_reply(reply, VALID)[0] == "anime_vae"

    def test_first_valid_mention_without_label(self):
        reply = "I would choose portrait_facefix over anime_vae here."
        assert parse_selection_reply(reply, VALID) == ("portrait_facefix", None)

    def test_labelled_id_wins_over_mention(self):
        reply = "Unlike anime_vae, this needs detail.\nFlow ID: lora_detail"
        assert parse_selection_reply(reply, VALID)[0] == "lora_detail"

    def test_invalid_labelled_id_is_not_rescued_by_mention(self):
        reply = "Flow ID: missing_flow. Explanation: it beats anime_vae"
        with pytest.raises(NoValidFlowIdError):
            parse_selection_reply(reply, VALID)

    def test_second_label_may_correct_the_first(self):
        reply = "Flow ID: missing_flow\nSorry, Flow ID: lora_detail"
        assert parse_selection_reply(reply, VALID)[0] == "lora_detail"

    @pytest.mark.parametrize(
        ("reply", "expected"),
        [
            (
                "Flow ID: anime_vae\nExplanation: soft cel shading.",
                ("anime_vae", "soft cel shading."),
            ),
            (
                "flow id - lora_detail\nexplanation - busy streets.",
                ("lora_detail", "busy streets."),
            ),
            ("Flow-ID: 'portrait_facefix'", ("portrait_facefix", None)),
            ("**Flow ID**: anime_vae", ("anime_vae", None)),
            (
                "I pick lora_detail.\n\nExplanation: the Urban column is highest.",
                ("lora_detail", "the Urban column is highest."),
            ),
            ("FLOW_ID=anime_vae", ("anime_vae", None)),
            (
                "Flow ID: `lora_detail`\n\nExplanation:\nBest Fantasy mean.",
                ("lora_detail", "Best Fantasy mean."),
            ),
            ("Flow ID: anime_vae.\nExplanation: ", ("anime_vae", None)),
            ("Between anime_vae and lora_detail, anime_vae fits best.", ("anime_vae", None)),
            (
                "Flow ID #portrait_facefix -- Explanation: faces need restoring.",
                ("portrait_facefix", "faces need restoring."),
            ),
        ],
    )
    def test_reply_shapes(self, reply, expected):
        assert parse_selection_reply(reply, VALID) == expected

    def test_no_valid_id(self):
        with pytest.raises(NoValidFlowIdError):
            parse_selection_reply("Flow ID: missing_flow", VALID)


class TestInContextSelectionAgent:
    def test_retries_until_valid(self):
        llm = MockLLMClient(["no idea", "Flow ID: anime_vae"])
        agent = InContextSelectionAgent(llm, VALID)

        flow_id, _ = agent.run(context="flow_id | Anime", prompt_text="a cat")

        assert flow_id == "anime_vae"
        assert "Flow ID: <id>" in llm.calls[1][1]

    def test_gives_up_after_two_retries(self):
        llm = MockLLMClient(["no idea"])
        with pytest.raises(NoValidFlowIdError):
            InContextSelectionAgent(llm, VALID).run(context="", prompt_text="a cat")
        assert len(llm.calls) == 3


# ---------------------------------------------------------------------------
# Flow prediction
# ---------------------------------------------------------------------------


class TestExtractJsonObject:
    def test_embedded_object(self):
        assert extract_json_object('Here you go: {"a": {"b": 1}} done') == '{"a": {"b": 1}}'

    def test_skips_broken_brace(self):
        assert extract_json_object('{oops} then {"a": 1}') == '{"a": 1}'

    def test_no_object(self):
        with pytest.raises(NoJsonFoundError):
            extract_json_object("[1, 2, 3]")


class TestParseFtResponse:
    def test_exact_corpus_flow(self, templates):
        flow_id, graph = templates[1]

        result = parse_ft_response(f"Sure!\n{serialize_flow(graph)}", templates, "p1")

        assert result.flow_id == flow_id
        assert result.prompt_id == "p1"
        assert result.neighbor_similarity == 1.0
        assert result.method == SelectionMethod.fine_tuned

    def test_novel_flow_gets_content_id(self, templates):
        _, graph = templates[1]
        novel = graph.with_inputs({("3", "steps"): 99})

        result = parse_ft_response(serialize_flow(novel), templates)

        assert result.flow_id == flow_id_for(novel)
        assert result.neighbor_id == templates[1][0]
        assert 0.0 < result.neighbor_similarity < 1.0

    def test_invalid_flow(self, templates):
        with pytest.raises(InvalidFlowError, match="unknown node"):
            parse_ft_response('{"1": {"class_type": "A", "inputs": {"x": ["9", 0]}}}', templates)

    def test_empty_corpus(self, simple_graph):
        with pytest.raises(EmptyCorpusError):
            parse_ft_response(serialize_flow(simple_graph), [])


class TestFlowPredictionAgent:
    def test_retries_then_parses(self, templates):
        good = f"```json\n{serialize_flow(templates[0][1])}\n```"
        llm = MockLLMClient(["I think a sampler would help.", good])

        result = FlowPredictionAgent(llm, templates).run(instruction="predict")

        assert result.flow_id == templates[0][0]
        assert llm.calls[0] == ("", "predict")
        assert "JSON object" in llm.calls[1][1]

    def test_gives_up_after_three_retries(self, templates):
        llm = MockLLMClient(["still no json"])
        with pytest.raises(NoJsonFoundError):
            FlowPredictionAgent(llm, templates).run(instruction="predict")
        assert len(llm.calls) == 4
