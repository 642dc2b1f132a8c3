"""Pydantic data models for flow tailor."""

from __future__ import annotations

import math
from datetime import UTC, datetime
from typing import Annotated, Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    field_validator,
    model_validator,
)

from flow_tailor.enums import SelectionMethod
from flow_tailor.exceptions import FlowParseError
from flow_tailor.graph import WorkflowGraph, graph_from_dict, parse_flow


def _coerce_graph(value: Any) -> WorkflowGraph:
    if isinstance(value, WorkflowGraph):
        return value
    try:
        if isinstance(value, str | bytes):
            return parse_flow(value)
        if isinstance(value, dict):
            return graph_from_dict(value)
    except FlowParseError as exc:
        raise ValueError(str(exc)) from exc
    raise ValueError(f"Expected a workflow graph, got {type(value).__name__}")


# Stored as the API-format mapping; accepts a graph, a mapping or JSON text.
GraphField = Annotated[
    WorkflowGraph,
    PlainValidator(_coerce_graph),
    PlainSerializer(lambda graph: graph.to_api_dict(), return_type=dict),
]


def _utc_now() -> str:
    return datetime.now(UTC).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# Prompts and generation
# ---------------------------------------------------------------------------


class PromptRecord(BaseModel):
    """A user prompt to generate images for."""

    prompt_id: str
    text: str
    labels: list[str] | None = None

    @field_validator("text")
    @classmethod
    def _text_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("prompt text must be non-empty")
        return value


class GenerationJob(BaseModel):
    """A prompt-bound flow ready for the executor."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    prompt_id: str
    flow_id: str
    resolved_graph: GraphField
    seed: int = Field(ge=0)


class ImageHandle(BaseModel):
    """Opaque reference to one generated image."""

    prompt_id: str
    flow_id: str
    seed: int = Field(ge=0)
    location: str


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

DEFAULT_SCORER_NAMES = ["aesthetic", "image_reward", "hps", "pickscore"]
DEFAULT_WEIGHTS = {"aesthetic": 0.5, "image_reward": 1.0, "hps": 1.5, "pickscore": 1.5}


class ScorerStats(BaseModel, frozen=True):
    mean: float
    std: float = Field(gt=0)


class EnsembleConfig(BaseModel):
    """Scorer set, weights and the standardization fitted for a dataset."""

    scorer_names: list[str] = Field(default_factory=lambda: list(DEFAULT_SCORER_NAMES))
    weights: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    standardization_stats: dict[str, ScorerStats] | None = None
    scale: float = Field(default=0.1, gt=0)
    offset: float = 0.4

    @model_validator(mode="after")
    def _covers_scorer_set(self) -> EnsembleConfig:
        if not self.scorer_names:
            raise ValueError("scorer_names must not be empty")
        if len(set(self.scorer_names)) != len(self.scorer_names):
            raise ValueError("scorer_names must be unique")
        names = set(self.scorer_names)
        if set(self.weights) != names:
            raise ValueError(f"weights must cover exactly {sorted(names)}")
        bad = sorted(n for n, w in self.weights.items() if not w > 0)
        if bad:
            raise ValueError(f"weights must be positive: {bad}")
        if self.standardization_stats is not None and set(self.standardization_stats) != names:
            raise ValueError(f"standardization_stats must cover exactly {sorted(names)}")
        return self


class ScoredTriplet(BaseModel):
    """One (prompt, flow, score) record of the training dataset.

    ``ensemble`` stays None until the store holds enough vectors to standardize.
    """

    prompt_id: str
    flow_id: str
    seed: int = Field(ge=0)
    raw: dict[str, float]
    ensemble: float | None = None
    timestamp: str = Field(default_factory=_utc_now)

    @field_validator("raw")
    @classmethod
    def _finite_raw(cls, value: dict[str, float]) -> dict[str, float]:
        for name, score in value.items():
            if not math.isfinite(score):
                raise ValueError(f"raw score {name} is not finite")
        return value


# ---------------------------------------------------------------------------
# Labels and score table
# ---------------------------------------------------------------------------


class LabelAssignment(BaseModel):
    prompt_id: str
    labels: list[str] = Field(min_length=1)


class ScoreTable(BaseModel):
    """Flows x labels matrix of mean ensemble scores.

    ``cells`` and ``support`` omit absent (flow, label) pairs; ``kept`` is the
    median-filter mask, all True until filtered.
    """

    flow_ids: list[str]
    labels: list[str]
    cells: dict[str, dict[str, float]]
    support: dict[str, dict[str, int]]
    kept: dict[str, bool]

    def cell(self, flow_id: str, label: str) -> float | None:
        return self.cells.get(flow_id, {}).get(label)

    def kept_flows(self) -> list[str]:
        return sorted(f for f in self.flow_ids if self.kept.get(f, False))

    def discarded_flows(self) -> list[str]:
        return sorted(f for f in self.flow_ids if not self.kept.get(f, False))


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------


class TargetScore(BaseModel, frozen=True):
    value: float

    @field_validator("value")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("target score must be finite")
        return value


class SelectionResult(BaseModel):
    """The flow chosen for one prompt.

    ``graph`` is the selected flow before prompt binding; ``resolved_graph``
    carries the prompt text.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    prompt_id: str
    flow_id: str
    method: SelectionMethod
    explanation: str | None = None
    target_score: float | None = None
    graph: GraphField
    resolved_graph: GraphField
    neighbor_id: str | None = None
    neighbor_similarity: float | None = None


class FtExample(BaseModel):
    """One instruction-tuning record."""

    instruction: str
    completion: str
