"""Exception hierarchy for flow tailor."""

from __future__ import annotations


class FlowTailorError(Exception):
    """Base exception for all flow tailor errors."""


class ConfigError(FlowTailorError):
    """Configuration loading or validation error."""


# ---------------------------------------------------------------------------
# Workflow graph parsing
# ---------------------------------------------------------------------------


class FlowParseError(FlowTailorError):
    """A workflow JSON document could not be turned into a valid graph."""


class MalformedJsonError(FlowParseError):
    """The input is not well-formed API-format JSON."""


class EmptyGraphError(FlowParseError):
    """The workflow contains no nodes."""


class UnknownLinkTargetError(FlowParseError):
    """A link references a node id that does not exist."""

    def __init__(self, node_id: str, source_id: str = "", input_name: str = "") -> None:
        self.node_id = node_id
        self.source_id = source_id
        self.input_name = input_name
        where = f" (from {source_id}.{input_name})" if source_id else ""
        super().__init__(f"Link targets unknown node {node_id!r}{where}")


class CycleDetectedError(FlowParseError):
    """The link graph contains a cycle."""

    def __init__(self, path: list[str]) -> None:
        self.path = path
        super().__init__(f"Cycle detected: {' -> '.join(path)}")


class BadLinkShapeError(FlowParseError):
    """An array input is not a [node_id, output_index] pair."""

    def __init__(self, node_id: str, input_name: str, detail: str = "") -> None:
        self.node_id = node_id
        self.input_name = input_name
        suffix = f": {detail}" if detail else ""
        super().__init__(f"Bad link shape at {node_id}.{input_name}{suffix}")


class UnsupportedInputError(FlowParseError):
    """An input value is neither a scalar literal nor a link."""

    def __init__(self, node_id: str, input_name: str, kind: str) -> None:
        self.node_id = node_id
        self.input_name = input_name
        super().__init__(f"Unsupported {kind} value at {node_id}.{input_name}")


# ---------------------------------------------------------------------------
# Corpus, registry and augmentation
# ---------------------------------------------------------------------------


class CorpusError(FlowTailorError):
    """Flow corpus or component registry error."""


class EmptyCorpusError(CorpusError):
    """An operation needed at least one corpus flow."""


class NoPromptSlotError(CorpusError):
    """A flow has no text input that can receive the user prompt."""


class NoMatchingSlotError(CorpusError):
    """A mutation found no input covered by its slot rules."""


class RegistryError(CorpusError):
    """The component registry violates its invariants."""


class MissingFlowError(CorpusError):
    """A flow id referenced by a record is not in the corpus."""

    def __init__(self, flow_id: str) -> None:
        self.flow_id = flow_id
        super().__init__(f"Flow not found in corpus: {flow_id}")


# ---------------------------------------------------------------------------
# External services
# ---------------------------------------------------------------------------


class ExternalServiceError(FlowTailorError):
    """An external executor, scorer or LLM failed."""


class ExecutorError(ExternalServiceError):
    """Image generation executor error."""


class ExecutorUnavailableError(ExecutorError):
    """The executor could not be reached."""


class ExecutionFailedError(ExecutorError):
    """The executor accepted the flow but a node failed."""

    def __init__(self, node_id: str | None, message: str) -> None:
        self.node_id = node_id
        self.message = message
        where = f" at node {node_id}" if node_id else ""
        super().__init__(f"Execution failed{where}: {message}")


class ExecutorTimeoutError(ExecutorError):
    """The executor did not finish within the configured time."""

    def __init__(self, seconds: float) -> None:
        self.seconds = seconds
        super().__init__(f"Generation did not complete within {seconds:g}s")


class ScorerUnavailableError(ExternalServiceError):
    """A quality scorer could not produce a value."""

    def __init__(self, name: str, detail: str = "") -> None:
        self.name = name
        suffix = f": {detail}" if detail else ""
        super().__init__(f"Scorer {name!r} unavailable{suffix}")


class LLMError(ExternalServiceError):
    """LLM generation or communication error."""


# ---------------------------------------------------------------------------
# Scoring and persistence
# ---------------------------------------------------------------------------


class ScoringError(FlowTailorError):
    """Ensemble score computation error."""


class DegenerateScorerError(ScoringError):
    """A scorer produced constant values, so it cannot be standardized."""

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"Scorer {name!r} has zero variance")


class MissingScorerError(ScoringError):
    """A raw score vector lacks a configured scorer."""

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"Raw score vector is missing scorer {name!r}")


class InsufficientDataError(ScoringError):
    """Too few vectors to fit standardization statistics."""


class StoreError(FlowTailorError):
    """Persistent store read/write error or corruption."""


class PipelineError(FlowTailorError):
    """Batch pipeline execution error."""


# ---------------------------------------------------------------------------
# Labeling and selection
# ---------------------------------------------------------------------------


class LabelingError(FlowTailorError):
    """Prompt labeling or score table error."""


class NoLabelsAssignedError(LabelingError):
    """The labeler produced no label from the vocabulary."""

    def __init__(self, prompt_id: str) -> None:
        self.prompt_id = prompt_id
        super().__init__(f"No labels assigned to prompt {prompt_id}")


class EmptyDatasetError(LabelingError):
    """No usable triplets were available to build a table."""


class SelectionError(FlowTailorError):
    """Flow selection error."""


class NoValidFlowIdError(SelectionError):
    """An in-context response named no flow present in the table."""


class NoJsonFoundError(SelectionError):
    """A fine-tuned response contained no JSON object."""


class InvalidFlowError(SelectionError):
    """A fine-tuned response contained JSON that is not a valid flow."""

    def __init__(self, detail: str) -> None:
        self.detail = detail
        super().__init__(f"Predicted flow is invalid: {detail}")
