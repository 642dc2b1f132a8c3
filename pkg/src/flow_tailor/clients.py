"""Factories turning configuration into executor, scorer, labeler and LLM clients."""

from __future__ import annotations

from collections.abc import Sequence

from flow_tailor.config import PipelineConfig
from flow_tailor.exceptions import ConfigError
from flow_tailor.executor.base import ExecutorClient, MockExecutorClient
from flow_tailor.graph import WorkflowGraph
from flow_tailor.labeling import KeywordLabeler, LabelerClient, LLMLabeler
from flow_tailor.llm.base import LLMClient
from flow_tailor.registry import ComponentRegistry, load_registry, register_defaults
from flow_tailor.scorers.base import ScorerClient, SyntheticScorer


def build_registry(config: PipelineConfig) -> ComponentRegistry:
    """Registry from the configured files, or the built-in defaults."""
    paths = config.paths
    if paths.registry_file is None or paths.slot_rules_file is None:
        return register_defaults()
    return load_registry(config.resolve(paths.registry_file), config.resolve(paths.slot_rules_file))


def build_executor(config: PipelineConfig) -> ExecutorClient:
    """Return the configured executor.

    Raises:
        ConfigError: If a live executor has no URL.
    """
    settings = config.executor
    if settings.mock:
        return MockExecutorClient(
            fail_pairs=settings.fail_pairs, missing_models=settings.missing_models
        )
    if not settings.url:
        raise ConfigError("executor.url is required when executor.mock is false")

    from flow_tailor.executor.comfy import ComfyExecutorClient

    return ComfyExecutorClient(
        base_url=settings.url,
        output_dir=config.resolve(settings.output_dir),
        token_env=settings.token_env,
        timeout=settings.timeout,
        retries=settings.retries,
    )


def build_scorers(config: PipelineConfig) -> list[ScorerClient]:
    """One client per ensemble scorer, in ensemble order."""
    names = config.ensemble.scorer_names
    if config.scorers.mock:
        return [SyntheticScorer(name) for name in names]

    from flow_tailor.scorers.http import HttpScorerClient

    missing = [name for name in names if name not in config.scorers.urls]
    if missing:
        raise ConfigError(f"scorers.urls has no endpoint for: {', '.join(missing)}")
    return [HttpScorerClient(name, config.scorers.urls[name]) for name in names]


def build_evaluator(config: PipelineConfig) -> ScorerClient:
    """Held-out scorer used by the target-score sweep."""
    settings = config.scorers
    if settings.mock:
        return SyntheticScorer(settings.evaluator)
    if not settings.evaluator_url:
        raise ConfigError("scorers.evaluator_url is required when scorers.mock is false")

    from flow_tailor.scorers.http import HttpScorerClient

    return HttpScorerClient(settings.evaluator, settings.evaluator_url)


def build_llm(
    config: PipelineConfig, corpus: Sequence[tuple[str, WorkflowGraph]] = ()
) -> LLMClient:
    """Return the configured LLM; the offline client answers from ``corpus``."""
    settings = config.llm
    if settings.mock:
        from flow_tailor.llm.mock import OfflineLLMClient

        return OfflineLLMClient(corpus)
    if settings.provider == "ollama":
        from flow_tailor.llm.ollama import OllamaClient

        return OllamaClient(model=settings.model, host=settings.url)
    if not settings.url:
        raise ConfigError("llm.url is required for the chat provider")

    from flow_tailor.llm.chat import ChatCompletionClient

    return ChatCompletionClient(
        settings.url, api_key_env=settings.api_key_env, default_max_tokens=settings.max_tokens
    )


def build_labeler(config: PipelineConfig) -> LabelerClient:
    if config.labeler.mock:
        return KeywordLabeler(config.labeler.keywords)
    return LLMLabeler(build_llm(config))


def build_keyword_labeler(config: PipelineConfig) -> LabelerClient:
    """Deterministic labeler used by fallback selection."""
    return KeywordLabeler(config.labeler.keywords)
