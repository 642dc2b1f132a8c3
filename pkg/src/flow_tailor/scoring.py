"""Prompt binding, generation, and ensemble quality scoring."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from flow_tailor.exceptions import (
    DegenerateScorerError,
    InsufficientDataError,
    MissingScorerError,
    ScorerUnavailableError,
    ScoringError,
)
from flow_tailor.executor.base import ExecutorClient
from flow_tailor.graph import InputValue, WorkflowGraph, find_prompt_slots
from flow_tailor.models import (
    EnsembleConfig,
    GenerationJob,
    ImageHandle,
    PromptRecord,
    ScoredTriplet,
    ScorerStats,
)
from flow_tailor.scorers.base import ScorerClient

logger = logging.getLogger(__name__)

RawScoreVector = dict[str, float]


def bind_prompt(graph: WorkflowGraph, prompt: PromptRecord, negative_default: str) -> WorkflowGraph:
    """Write the prompt into every positive slot.

    Negative slots are filled with ``negative_default`` only when empty, so
    template-authored negatives survive.

    Raises:
        NoPromptSlotError: If the flow has no positive slot.
    """
    slots = find_prompt_slots(graph)
    updates: dict[tuple[str, str], InputValue] = {slot: prompt.text for slot in slots.positive}
    for node_id, input_name in slots.negative:
        if graph.nodes[node_id].inputs[input_name] == "":
            updates[(node_id, input_name)] = negative_default
    return graph.with_inputs(updates)


def submit_generation(job: GenerationJob, executor: ExecutorClient) -> ImageHandle:
    """Run one job on the executor."""
    handle = executor.generate(job)
    logger.debug("Generated %s/%s -> %s", job.prompt_id, job.flow_id, handle.location)
    return handle


def score_image(
    handle: ImageHandle, prompt_text: str, scorers: Sequence[ScorerClient]
) -> RawScoreVector:
    """Score one image with every scorer.

    Raises:
        ScorerUnavailableError: If any scorer fails; no partial vector is returned.
    """
    raw: RawScoreVector = {}
    for scorer in scorers:
        try:
            value = float(scorer.score(handle, prompt_text))
        except ScorerUnavailableError:
            raise
        except Exception as exc:
            raise ScorerUnavailableError(scorer.name, str(exc)) from exc
        if not math.isfinite(value):
            raise ScorerUnavailableError(scorer.name, f"non-finite score {value}")
        raw[scorer.name] = value
    return raw


def fit_standardization(
    raw_vectors: Sequence[RawScoreVector],
    scorer_names: Sequence[str] | None = None,
) -> dict[str, ScorerStats]:
    """Per-scorer mean and population standard deviation.

    Raises:
        InsufficientDataError: Fewer than two vectors.
        MissingScorerError: A vector lacks one of the scorers.
        DegenerateScorerError: A scorer is constant over the corpus.
    """
    if len(raw_vectors) < 2:
        raise InsufficientDataError(
            f"Need at least 2 score vectors to standardize, got {len(raw_vectors)}"
        )
    names = list(scorer_names) if scorer_names is not None else list(raw_vectors[0])
    stats: dict[str, ScorerStats] = {}
    for name in names:
        try:
            column = np.array([vector[name] for vector in raw_vectors], dtype=np.float64)
        except KeyError as exc:
            raise MissingScorerError(name) from exc
        std = float(column.std(ddof=0))
        if std == 0.0:
            raise DegenerateScorerError(name)
        stats[name] = ScorerStats(mean=float(column.mean()), std=std)
    return stats


def aggregate_score(raw: RawScoreVector, config: EnsembleConfig) -> float:
    """Weighted sum of z-scores, mapped by ``offset + scale * sum``.

    Raises:
        ScoringError: If the config carries no standardization statistics.
        MissingScorerError: If ``raw`` lacks a configured scorer.
    """
    stats = config.standardization_stats
    if stats is None:
        raise ScoringError("Ensemble config has no standardization statistics")
    terms: list[float] = []
    for name in config.scorer_names:
        if name not in raw:
            raise MissingScorerError(name)
        terms.append(config.weights[name] * (raw[name] - stats[name].mean) / stats[name].std)
    return config.offset + config.scale * math.fsum(terms)


def score_histogram(
    triplets: Sequence[ScoredTriplet], bins: int = 10
) -> list[tuple[float, float, int]]:
    """Bin ensemble scores as (low, high, count) rows; unscored triplets are skipped."""
    values = np.array(
        [t.ensemble for t in triplets if t.ensemble is not None], dtype=np.float64
    )
    if values.size == 0:
        return []
    counts, edges = np.histogram(values, bins=bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))
    ]
