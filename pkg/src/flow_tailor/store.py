"""File-backed persistence: JSONL record stores, corpus directories, score tables."""

from __future__ import annotations

import json
import logging
import threading
from collections.abc import Iterable
from pathlib import Path
from typing import Generic, TypeVar

from pydantic import BaseModel, ValidationError

from flow_tailor.exceptions import CorpusError, StoreError
from flow_tailor.graph import FlowMetadata, WorkflowGraph, load_flow_dir, serialize_flow
from flow_tailor.models import (
    EnsembleConfig,
    LabelAssignment,
    PromptRecord,
    ScoredTriplet,
    ScoreTable,
    SelectionResult,
)

logger = logging.getLogger(__name__)

RecordT = TypeVar("RecordT", bound=BaseModel)


class JsonlStore(Generic[RecordT]):
    """JSONL file of pydantic records, appended line by line.

    Appends and rewrites are serialized through one lock.
    """

    record_type: type[RecordT]

    def __init__(self, path: Path, record_type: type[RecordT]) -> None:
        self.path = path
        self.record_type = record_type
        self._lock = threading.Lock()

    def append(self, record: RecordT) -> None:
        self.append_many([record])

    def append_many(self, records: Iterable[RecordT]) -> None:
        lines = [json.dumps(r.model_dump(mode="json"), ensure_ascii=False) + "\n" for r in records]
        if not lines:
            return
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            try:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.writelines(lines)
            except OSError as exc:
                raise StoreError(f"Cannot append to {self.path}: {exc}") from exc

    def write_all(self, records: Iterable[RecordT]) -> None:
        """Replace the file with ``records`` through a temp file and an atomic rename."""
        lines = [json.dumps(r.model_dump(mode="json"), ensure_ascii=False) + "\n" for r in records]
        tmp = self.path.with_name(self.path.name + ".tmp")
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            try:
                with tmp.open("w", encoding="utf-8") as fh:
                    fh.writelines(lines)
                tmp.replace(self.path)
            except OSError as exc:
                raise StoreError(f"Cannot rewrite {self.path}: {exc}") from exc

    def read_all(self) -> list[RecordT]:
        """Return every record in file order.

        Raises:
            StoreError: On an unreadable file or a corrupt line.
        """
        if not self.path.exists():
            return []
        records: list[RecordT] = []
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"Cannot read {self.path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(self.record_type.model_validate_json(line))
            except ValidationError as exc:
                raise StoreError(f"{self.path}:{lineno}: corrupt record: {exc}") from exc
        return records


class TripletStore(JsonlStore[ScoredTriplet]):
    """Triplet dataset with a ``.config.json`` sidecar holding its EnsembleConfig."""

    def __init__(self, path: Path) -> None:
        super().__init__(path, ScoredTriplet)

    @property
    def sidecar_path(self) -> Path:
        return self.path.with_name(self.path.name + ".config.json")

    def completed_pairs(self) -> set[tuple[str, str]]:
        return {(t.prompt_id, t.flow_id) for t in self.read_all()}

    def read_scored(self) -> list[ScoredTriplet]:
        """Triplets whose ensemble score has been computed."""
        return [t for t in self.read_all() if t.ensemble is not None]

    def read_config(self) -> EnsembleConfig | None:
        if not self.sidecar_path.exists():
            return None
        try:
            return EnsembleConfig.model_validate_json(self.sidecar_path.read_text(encoding="utf-8"))
        except (OSError, ValidationError) as exc:
            raise StoreError(f"Corrupt ensemble sidecar {self.sidecar_path}: {exc}") from exc

    def write_config(self, config: EnsembleConfig) -> None:
        self.sidecar_path.parent.mkdir(parents=True, exist_ok=True)
        self.sidecar_path.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")


def assignment_store(path: Path) -> JsonlStore[LabelAssignment]:
    return JsonlStore(path, LabelAssignment)


def selection_store(path: Path) -> JsonlStore[SelectionResult]:
    return JsonlStore(path, SelectionResult)


def read_prompts(path: Path) -> list[PromptRecord]:
    """Load a prompt set from JSONL ``{prompt_id, text}`` lines.

    Raises:
        StoreError: On a missing file, corrupt line, or duplicate prompt_id.
    """
    if not path.exists():
        raise StoreError(f"Prompt file not found: {path}")
    prompts = JsonlStore(path, PromptRecord).read_all()
    seen: set[str] = set()
    for prompt in prompts:
        if prompt.prompt_id in seen:
            raise StoreError(f"Duplicate prompt_id {prompt.prompt_id} in {path}")
        seen.add(prompt.prompt_id)
    return prompts


# ---------------------------------------------------------------------------
# Corpus directories
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.jsonl"


def write_corpus(corpus: list[tuple[str, WorkflowGraph]], path: Path) -> None:
    """Write one canonical JSON file per flow plus a lineage manifest.

    Existing ``*.json`` files in ``path`` are replaced.
    """
    path.mkdir(parents=True, exist_ok=True)
    for stale in path.glob("*.json"):
        stale.unlink()
    manifest: list[str] = []
    for flow_id, graph in sorted(corpus, key=lambda item: item[0]):
        (path / f"{flow_id}.json").write_text(serialize_flow(graph) + "\n", encoding="utf-8")
        metadata = graph.metadata or FlowMetadata()
        entry = {
            "flow_id": flow_id,
            "template_id": metadata.template_id,
            "mutations": list(metadata.lineage),
        }
        manifest.append(json.dumps(entry, ensure_ascii=False) + "\n")
    (path / MANIFEST_NAME).write_text("".join(manifest), encoding="utf-8")
    logger.info("Wrote %d flows to %s", len(corpus), path)


def read_corpus(path: Path) -> list[tuple[str, WorkflowGraph]]:
    """Load a corpus directory, restoring lineage from its manifest when present."""
    flows = load_flow_dir(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        return flows
    lineage: dict[str, FlowMetadata] = {}
    for lineno, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            lineage[entry["flow_id"]] = FlowMetadata(
                template_id=entry.get("template_id"), lineage=tuple(entry.get("mutations", []))
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorpusError(f"{manifest_path}:{lineno}: corrupt manifest entry") from exc
    return [(fid, graph.with_metadata(lineage.get(fid, graph.metadata))) for fid, graph in flows]


# ---------------------------------------------------------------------------
# Score tables
# ---------------------------------------------------------------------------


def save_table(table: ScoreTable, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_table(path: Path) -> ScoreTable:
    if not path.exists():
        raise StoreError(f"Score table not found: {path} (run `flow-tailor table` first)")
    try:
        return ScoreTable.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise StoreError(f"Corrupt score table {path}: {exc}") from exc
