"""Tests for flow_tailor.clients."""

from pathlib import Path

import pytest

from flow_tailor.clients import (
    build_evaluator,
    build_executor,
    build_keyword_labeler,
    build_labeler,
    build_llm,
    build_registry,
    build_scorers,
)
from flow_tailor.config import PipelineConfig
from flow_tailor.exceptions import ConfigError
from flow_tailor.executor.base import MockExecutorClient
from flow_tailor.executor.comfy import ComfyExecutorClient
from flow_tailor.labeling import KeywordLabeler, LLMLabeler
from flow_tailor.llm.chat import ChatCompletionClient
from flow_tailor.llm.mock import OfflineLLMClient
from flow_tailor.llm.ollama import OllamaClient
from flow_tailor.registry import ComponentRegistry
from flow_tailor.scorers.base import SyntheticScorer
from flow_tailor.scorers.http import HttpScorerClient

SCORER_URLS = {
    "aesthetic": "http://s:1/aesthetic",
    "image_reward": "http://s:1/image_reward",
    "hps": "http://s:1/hps",
    "pickscore": "http://s:1/pickscore",
}


def _config(tmp_path: Path, **overrides) -> PipelineConfig:
    return PipelineConfig.model_validate(overrides).with_base_dir(tmp_path)


class TestBuildRegistry:
    def test_defaults_without_files(self, tmp_path):
        assert isinstance(build_registry(_config(tmp_path)), ComponentRegistry)


# ---------------------------------------------------------------------------
# Executor
# ---------------------------------------------------------------------------


class TestBuildExecutor:
    def test_mock_carries_failure_settings(self, tmp_path):
        settings = {"fail_pairs": [["p1", "f1"]], "missing_models": ["sdxl.safetensors"]}
        config = _config(tmp_path, executor=settings)

        executor = build_executor(config)

        assert isinstance(executor, MockExecutorClient)
        assert executor.fail_pairs == {("p1", "f1")}
        assert executor.missing_models == {"sdxl.safetensors"}

    def test_live(self, tmp_path):
        config = _config(tmp_path, executor={"mock": False, "url": "http://gpu:8188/"})

        executor = build_executor(config)

        assert isinstance(executor, ComfyExecutorClient)
        assert executor.base_url == "http://gpu:8188"
        assert executor.output_dir == tmp_path / "images"

    def test_live_without_url(self, tmp_path):
        with pytest.raises(ConfigError, match="executor.url"):
            build_executor(_config(tmp_path, executor={"mock": False}))


# ---------------------------------------------------------------------------
# Scorers
# ---------------------------------------------------------------------------


class TestBuildScorers:
    def test_mock_in_ensemble_order(self, tmp_path):
        scorers = build_scorers(_config(tmp_path))
        assert all(isinstance(s, SyntheticScorer) for s in scorers)
        assert [s.name for s in scorers] == ["aesthetic", "image_reward", "hps", "pickscore"]

    def test_live(self, tmp_path):
        scorers = build_scorers(_config(tmp_path, scorers={"mock": False, "urls": SCORER_URLS}))
        assert all(isinstance(s, HttpScorerClient) for s in scorers)
        assert scorers[2].url == "http://s:1/hps"

    def test_live_missing_endpoint(self, tmp_path):
        urls = {k: v for k, v in SCORER_URLS.items() if k != "pickscore"}
        with pytest.raises(ConfigError, match="pickscore"):
            build_scorers(_config(tmp_path, scorers={"mock": False, "urls": urls}))


class TestBuildEvaluator:
    def test_mock(self, tmp_path):
        evaluator = build_evaluator(_config(tmp_path))
        assert isinstance(evaluator, SyntheticScorer)
        assert evaluator.name == "hps_v2"

    def test_live(self, tmp_path):
        config = _config(
            tmp_path, scorers={"mock": False, "evaluator_url": "http://s:1/hps_v2"}
        )
        evaluator = build_evaluator(config)
        assert isinstance(evaluator, HttpScorerClient)
        assert evaluator.url == "http://s:1/hps_v2"

    def test_live_without_url(self, tmp_path):
        with pytest.raises(ConfigError, match="evaluator_url"):
            build_evaluator(_config(tmp_path, scorers={"mock": False}))


# ---------------------------------------------------------------------------
# LLM and labelers
# ---------------------------------------------------------------------------


class TestBuildLLM:
    def test_mock_is_offline(self, tmp_path, templates):
        llm = build_llm(_config(tmp_path), templates)
        assert isinstance(llm, OfflineLLMClient)
        assert len(llm.corpus) == len(templates)

    def test_ollama(self, tmp_path):
        config = _config(
            tmp_path,
            llm={"mock": False, "provider": "ollama", "model": "mistral", "url": "http://o:1"},
        )
        llm = build_llm(config)
        assert isinstance(llm, OllamaClient)
        assert llm.model == "mistral"
        assert llm.host == "http://o:1"

    def test_chat(self, tmp_path):
        config = _config(
            tmp_path, llm={"mock": False, "url": "http://llm:8000/v1/generate", "max_tokens": 256}
        )
        llm = build_llm(config)
        assert isinstance(llm, ChatCompletionClient)
        assert llm.default_max_tokens == 256

    def test_chat_without_url(self, tmp_path):
        with pytest.raises(ConfigError, match="llm.url"):
            build_llm(_config(tmp_path, llm={"mock": False}))


class TestBuildLabeler:
    def test_mock_is_keyword(self, tmp_path):
        assert isinstance(build_labeler(_config(tmp_path)), KeywordLabeler)

    def test_live_wraps_llm(self, tmp_path):
        config = _config(
            tmp_path,
            labeler={"mock": False},
            llm={"mock": False, "provider": "ollama"},
        )
        labeler = build_labeler(config)
        assert isinstance(labeler, LLMLabeler)
        assert isinstance(labeler.llm, OllamaClient)

    def test_keyword_labeler_ignores_mock_flag(self, tmp_path):
        config = _config(tmp_path, labeler={"mock": False})
        assert isinstance(build_keyword_labeler(config), KeywordLabeler)
