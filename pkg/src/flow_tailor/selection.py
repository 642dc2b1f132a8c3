"""Flow selection for novel prompts and fine-tuning dataset export."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from pydantic import BaseModel

from flow_tailor.agents.predictor import FlowPredictionAgent, parse_ft_response
from flow_tailor.agents.selector import InContextSelectionAgent
from flow_tailor.enums import SelectionMethod
from flow_tailor.exceptions import (
    FlowTailorError,
    LLMError,
    MissingFlowError,
    NoLabelsAssignedError,
    NoValidFlowIdError,
    SelectionError,
)
from flow_tailor.executor.base import ExecutorClient
from flow_tailor.graph import WorkflowGraph, serialize_flow
from flow_tailor.labeling import DEFAULT_LABELS, LabelerClient, assign_labels
from flow_tailor.llm.base import LLMClient
from flow_tailor.models import (
    FtExample,
    GenerationJob,
    PromptRecord,
    ScoredTriplet,
    ScoreTable,
    SelectionResult,
    TargetScore,
)
from flow_tailor.scorers.base import ScorerClient
from flow_tailor.scoring import bind_prompt, submit_generation
from flow_tailor.templates import FT_TEMPLATE, render_ft_instruction

logger = logging.getLogger(__name__)

Corpus = Sequence[tuple[str, WorkflowGraph]]

__all__ = [
    "SweepRow",
    "build_ft_request",
    "export_ft_dataset",
    "parse_ft_response",
    "score_sweep",
    "select_all",
    "select_fallback",
    "select_fine_tuned",
    "select_in_context",
    "write_ft_dataset",
]


def _lookup(corpus: Corpus, flow_id: str) -> WorkflowGraph:
    for candidate, graph in corpus:
        if candidate == flow_id:
            return graph
    raise MissingFlowError(flow_id)


def _argmax(scores: dict[str, float]) -> str | None:
    best: tuple[str, float] | None = None
    for flow_id in sorted(scores):
        if best is None or scores[flow_id] > best[1]:
            best = (flow_id, scores[flow_id])
    return best[0] if best else None


# ---------------------------------------------------------------------------
# Table-based selection
# ---------------------------------------------------------------------------


def select_fallback(
    prompt: PromptRecord,
    table: ScoreTable,
    labeler: LabelerClient,
    corpus: Corpus,
    *,
    vocabulary: Sequence[str] = DEFAULT_LABELS,
    negative_default: str = "",
) -> SelectionResult:
    """Pick the kept flow with the best mean cell over the prompt's labels.

    Absent cells are skipped; ties go to the smallest FlowId. A prompt that
    gets no labels, or whose labels have no cells, gets the flow with the
    best mean over all of its cells.
    """
    kept = table.kept_flows()
    if not kept:
        raise SelectionError("Score table has no kept flows")
    try:
        labels = assign_labels(prompt, labeler, vocabulary).labels
    except NoLabelsAssignedError:
        labels = []

    def _row_means(columns: Sequence[str]) -> dict[str, float]:
        means: dict[str, float] = {}
        for flow_id in kept:
            values = [v for c in columns if (v := table.cell(flow_id, c)) is not None]
            if values:
                means[flow_id] = math.fsum(values) / len(values)
        return means

    flow_id = _argmax(_row_means(labels)) if labels else None
    reason = f"best mean over labels {', '.join(labels)}"
    if flow_id is None:
        flow_id = _argmax(_row_means(table.labels))
        reason = "best overall mean"
        logger.info("Prompt %s: no usable labels, using %s", prompt.prompt_id, reason)
    if flow_id is None:
        raise SelectionError("Score table has no cells")

    graph = _lookup(corpus, flow_id)
    return SelectionResult(
        prompt_id=prompt.prompt_id,
        flow_id=flow_id,
        method=SelectionMethod.fallback,
        explanation=reason,
        graph=graph,
        resolved_graph=bind_prompt(graph, prompt, negative_default),
    )


def select_in_context(
    prompt: PromptRecord,
    context: str,
    llm: LLMClient,
    *,
    table: ScoreTable,
    labeler: LabelerClient,
    corpus: Corpus,
    vocabulary: Sequence[str] = DEFAULT_LABELS,
    negative_default: str = "",
    temperature: float = 0.0,
) -> SelectionResult:
    """Let an LLM choose a flow from the rendered table.

    Falls back to :func:`select_fallback` when the LLM is unavailable or
    never names a kept flow.
    """
    agent = InContextSelectionAgent(llm, table.kept_flows(), temperature=temperature)
    try:
        flow_id, explanation = agent.run(context=context, prompt_text=prompt.text)
    except (LLMError, NoValidFlowIdError) as exc:
        logger.warning(
            "In-context selection failed for %s (%s); falling back", prompt.prompt_id, exc
        )
        return select_fallback(
            prompt,
            table,
            labeler,
            corpus,
            vocabulary=vocabulary,
            negative_default=negative_default,
        )
    graph = _lookup(corpus, flow_id)
    return SelectionResult(
        prompt_id=prompt.prompt_id,
        flow_id=flow_id,
        method=SelectionMethod.in_context,
        explanation=explanation,
        graph=graph,
        resolved_graph=bind_prompt(graph, prompt, negative_default),
    )


# ---------------------------------------------------------------------------
# Score-conditioned prediction
# ---------------------------------------------------------------------------


def build_ft_request(
    prompt: PromptRecord,
    target: TargetScore,
    template: str = FT_TEMPLATE,
    training_range: tuple[float, float] | None = None,
) -> str:
    """Instruction for a score-conditioned model, shaped like the training data."""
    if training_range is not None and not training_range[0] <= target.value <= training_range[1]:
        logger.warning(
            "Target score %.3f is outside the training range [%.3f, %.3f]",
            target.value,
            *training_range,
        )
    return render_ft_instruction(template, prompt.text, target.value)


def select_fine_tuned(
    prompt: PromptRecord,
    target: TargetScore,
    llm: LLMClient,
    corpus: Corpus,
    template: str = FT_TEMPLATE,
    *,
    negative_default: str = "",
    training_range: tuple[float, float] | None = None,
    temperature: float = 0.0,
    max_tokens: int | None = None,
) -> SelectionResult:
    """Predict a flow for (prompt, target) and bind the prompt into it.

    Raises:
        NoJsonFoundError, InvalidFlowError: After the retries are exhausted.
        LLMError: If the LLM is unavailable.
    """
    instruction = build_ft_request(prompt, target, template, training_range)
    agent = FlowPredictionAgent(llm, corpus, temperature=temperature, max_tokens=max_tokens)
    result: SelectionResult = agent.run(instruction=instruction)
    logger.info(
        "Predicted flow for %s: nearest %s at similarity %.4f",
        prompt.prompt_id,
        result.neighbor_id,
        result.neighbor_similarity,
    )
    return result.model_copy(
        update={
            "prompt_id": prompt.prompt_id,
            "target_score": target.value,
            "resolved_graph": bind_prompt(result.graph, prompt, negative_default),
        }
    )


def select_all(
    prompts: Sequence[PromptRecord],
    select_one: Callable[[PromptRecord], SelectionResult],
    workers: int = 4,
) -> list[SelectionResult]:
    """Run a selection function over prompts with bounded concurrency, in prompt order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(select_one, prompts))


# ---------------------------------------------------------------------------
# Dataset export
# ---------------------------------------------------------------------------


def export_ft_dataset(
    triplets: Sequence[ScoredTriplet],
    corpus: Corpus,
    template: str,
    prompts: Sequence[PromptRecord],
    *,
    predict_best: bool = False,
) -> list[FtExample]:
    """One instruction/completion pair per scored triplet, sorted by (prompt_id, flow_id).

    With ``predict_best`` only each prompt's top-scoring triplet is exported
    (ties go to the smallest FlowId) and no score is rendered.

    Raises:
        MissingFlowError: If a triplet's flow is not in the corpus.
        SelectionError: If a triplet's prompt is not in the prompt set.
    """
    flows = dict(corpus)
    texts = {p.prompt_id: p.text for p in prompts}
    ordered = sorted(
        (t for t in triplets if t.ensemble is not None), key=lambda t: (t.prompt_id, t.flow_id)
    )
    if predict_best:
        best: dict[str, ScoredTriplet] = {}
        for triplet in ordered:
            current = best.get(triplet.prompt_id)
            if current is None or triplet.ensemble > current.ensemble:
                best[triplet.prompt_id] = triplet
        ordered = [best[p] for p in sorted(best)]

    examples: list[FtExample] = []
    for triplet in ordered:
        if triplet.flow_id not in flows:
            raise MissingFlowError(triplet.flow_id)
        if triplet.prompt_id not in texts:
            raise SelectionError(f"Prompt {triplet.prompt_id} is not in the prompt set")
        score = None if predict_best else triplet.ensemble
        examples.append(
            FtExample(
                instruction=render_ft_instruction(template, texts[triplet.prompt_id], score),
                completion=serialize_flow(flows[triplet.flow_id]),
            )
        )
    return examples


def write_ft_dataset(examples: Sequence[FtExample], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(json.dumps(e.model_dump(), ensure_ascii=False) + "\n" for e in examples),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Target-score sweep
# ---------------------------------------------------------------------------


class SweepRow(BaseModel):
    target: float
    mean_score: float | None
    evaluated: int
    failures: int


def score_sweep(
    prompts: Sequence[PromptRecord],
    targets: Sequence[TargetScore],
    llm: LLMClient,
    evaluator: ScorerClient,
    *,
    executor: ExecutorClient,
    corpus: Corpus,
    template: str = FT_TEMPLATE,
    negative_default: str = "",
    seed: int = 0,
) -> list[SweepRow]:
    """Mean held-out score of images generated from flows predicted per target."""
    rows: list[SweepRow] = []
    ordered = sorted(prompts, key=lambda p: p.prompt_id)
    for target in targets:
        scores: list[float] = []
        failures = 0
        for prompt in ordered:
            try:
                result = select_fine_tuned(
                    prompt, target, llm, corpus, template, negative_default=negative_default
                )
                job = GenerationJob(
                    prompt_id=prompt.prompt_id,
                    flow_id=result.flow_id,
                    resolved_graph=result.resolved_graph,
                    seed=seed,
                )
                handle = submit_generation(job, executor)
                scores.append(evaluator.score(handle, prompt.text))
            except FlowTailorError:
                logger.exception("Sweep cell %.3f/%s failed", target.value, prompt.prompt_id)
                failures += 1
        mean = math.fsum(scores) / len(scores) if scores else None
        rows.append(
            SweepRow(target=target.value, mean_score=mean, evaluated=len(scores), failures=failures)
        )
    return rows
