"""ComfyUI API-format workflow graphs.

A workflow is a DAG of typed nodes. Node inputs are either scalar literals or
links of the form ``[node_id, output_index]`` pointing at another node's
output. Graphs are validated on construction and never mutated afterwards;
edits go through :meth:`WorkflowGraph.with_inputs`, which returns a new graph.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import networkx as nx

from flow_tailor.exceptions import (
    BadLinkShapeError,
    CorpusError,
    CycleDetectedError,
    EmptyCorpusError,
    EmptyGraphError,
    FlowParseError,
    MalformedJsonError,
    NoPromptSlotError,
    UnknownLinkTargetError,
    UnsupportedInputError,
)

logger = logging.getLogger(__name__)

Scalar = str | int | float | bool


@dataclass(frozen=True)
class LinkRef:
    """Reference to output ``output_index`` of node ``node_id``."""

    node_id: str
    output_index: int


InputValue = LinkRef | Scalar


@dataclass(frozen=True)
class Node:
    """One block of a workflow."""

    class_type: str
    inputs: dict[str, InputValue]
    # Unknown per-node fields (e.g. "_meta"), kept verbatim.
    extras: dict[str, Any] = field(default_factory=dict)

    def links(self) -> Iterator[tuple[str, LinkRef]]:
        """Yield (input_name, link) pairs."""
        for name, value in self.inputs.items():
            if isinstance(value, LinkRef):
                yield name, value

    def literals(self) -> Iterator[tuple[str, Scalar]]:
        """Yield (input_name, literal) pairs."""
        for name, value in self.inputs.items():
            if not isinstance(value, LinkRef):
                yield name, value


@dataclass(frozen=True)
class FlowMetadata:
    """Where a flow came from. Not part of the serialized workflow."""

    template_id: str | None = None
    lineage: tuple[str, ...] = ()


class Edge(NamedTuple):
    source: str
    target: str
    input_name: str
    output_index: int


@dataclass(frozen=True)
class WorkflowGraph:
    """A validated, immutable workflow DAG."""

    nodes: dict[str, Node]
    metadata: FlowMetadata | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.nodes:
            raise EmptyGraphError("Workflow contains no nodes")
        for node_id in sorted(self.nodes):
            for input_name, link in self.nodes[node_id].links():
                if link.node_id not in self.nodes:
                    raise UnknownLinkTargetError(link.node_id, node_id, input_name)
        digraph = nx.DiGraph()
        digraph.add_nodes_from(sorted(self.nodes))
        digraph.add_edges_from((e.source, e.target) for e in self.edges())
        try:
            cycle = nx.find_cycle(digraph)
        except nx.NetworkXNoCycle:
            return
        path = [source for source, _ in cycle]
        raise CycleDetectedError([*path, path[0]])

    def edges(self) -> list[Edge]:
        """Return all links as edges from producer to consumer."""
        out: list[Edge] = []
        for node_id in sorted(self.nodes):
            for input_name, link in sorted(self.nodes[node_id].links()):
                out.append(Edge(link.node_id, node_id, input_name, link.output_index))
        return out

    def with_inputs(self, updates: Mapping[tuple[str, str], InputValue]) -> WorkflowGraph:
        """Return a copy with the given (node_id, input_name) values replaced."""
        nodes = dict(self.nodes)
        for (node_id, input_name), value in updates.items():
            node = nodes[node_id]
            nodes[node_id] = Node(
                class_type=node.class_type,
                inputs={**node.inputs, input_name: value},
                extras=node.extras,
            )
        return WorkflowGraph(nodes=nodes, metadata=self.metadata)

    def with_metadata(self, metadata: FlowMetadata | None) -> WorkflowGraph:
        """Return the same graph carrying different source metadata."""
        return WorkflowGraph(nodes=self.nodes, metadata=metadata)

    def to_api_dict(self) -> dict[str, Any]:
        """Return the ComfyUI API-format mapping."""
        payload: dict[str, Any] = {}
        for node_id, node in self.nodes.items():
            inputs = {
                name: [value.node_id, value.output_index] if isinstance(value, LinkRef) else value
                for name, value in node.inputs.items()
            }
            payload[node_id] = {**node.extras, "class_type": node.class_type, "inputs": inputs}
        return payload


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------


def _reject_duplicates(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    seen: dict[str, Any] = {}
    for key, value in pairs:
        if key in seen:
            raise MalformedJsonError(f"Duplicate key {key!r}")
        seen[key] = value
    return seen


def _reject_constant(name: str) -> Any:
    raise MalformedJsonError(f"Non-finite number {name} is not allowed")


def _convert_value(node_id: str, input_name: str, value: Any) -> InputValue:
    if isinstance(value, bool | int | str):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise UnsupportedInputError(node_id, input_name, "non-finite")
        return value
    if isinstance(value, list):
        if len(value) != 2:
            raise BadLinkShapeError(node_id, input_name, f"expected 2 elements, got {len(value)}")
        target, index = value
        if not isinstance(target, str):
            raise BadLinkShapeError(node_id, input_name, "node id must be a string")
        if isinstance(index, bool) or not isinstance(index, int) or index < 0:
            raise BadLinkShapeError(node_id, input_name, "output index must be a non-negative int")
        return LinkRef(target, index)
    kind = "null" if value is None else type(value).__name__
    raise UnsupportedInputError(node_id, input_name, kind)


def graph_from_dict(data: Any) -> WorkflowGraph:
    """Build a validated graph from an already-decoded API-format mapping."""
    if not isinstance(data, dict):
        raise MalformedJsonError(
            f"Expected an object mapping node ids to nodes, got {type(data).__name__}"
        )
    nodes: dict[str, Node] = {}
    for node_id, raw in data.items():
        if not isinstance(raw, dict):
            raise MalformedJsonError(f"Node {node_id}: expected an object")
        class_type = raw.get("class_type")
        if not isinstance(class_type, str) or not class_type:
            raise MalformedJsonError(f"Node {node_id}: class_type must be a non-empty string")
        raw_inputs = raw.get("inputs", {})
        if not isinstance(raw_inputs, dict):
            raise MalformedJsonError(f"Node {node_id}: inputs must be an object")
        inputs = {name: _convert_value(node_id, name, v) for name, v in raw_inputs.items()}
        extras = {k: v for k, v in raw.items() if k not in ("class_type", "inputs")}
        nodes[node_id] = Node(class_type=class_type, inputs=inputs, extras=extras)
    return WorkflowGraph(nodes=nodes)


def parse_flow(json_text: str | bytes) -> WorkflowGraph:
    """Parse API-format workflow JSON into a validated graph.

    Raises:
        MalformedJsonError: Invalid JSON, duplicate keys, or wrong structure.
        BadLinkShapeError: An array input that is not ``[node_id, index]``.
        UnsupportedInputError: Object or null input values.
        EmptyGraphError: No nodes.
        UnknownLinkTargetError: A link to a missing node.
        CycleDetectedError: The link graph is cyclic.
    """
    if isinstance(json_text, bytes):
        try:
            json_text = json_text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJsonError(f"Input is not UTF-8: {exc}") from exc
    try:
        data = json.loads(
            json_text,
            object_pairs_hook=_reject_duplicates,
            parse_constant=_reject_constant,
        )
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(
            f"Invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return graph_from_dict(data)


def serialize_flow(graph: WorkflowGraph) -> str:
    """Serialize to canonical API-format JSON (sorted keys, 2-space indent)."""
    return json.dumps(graph.to_api_dict(), sort_keys=True, indent=2, ensure_ascii=False)


def flow_id_for(graph: WorkflowGraph) -> str:
    """Return a content-derived FlowId for a graph."""
    digest = hashlib.blake2b(serialize_flow(graph).encode("utf-8"), digest_size=8)
    return f"flow_{digest.hexdigest()}"


def load_flow_dir(path: Path) -> list[tuple[str, WorkflowGraph]]:
    """Load every ``*.json`` flow in a directory, keyed by file stem.

    Raises:
        CorpusError: If the directory is missing or a file fails to parse.
    """
    if not path.is_dir():
        raise CorpusError(f"Flow directory not found: {path}")
    flows: list[tuple[str, WorkflowGraph]] = []
    for file in sorted(path.glob("*.json")):
        try:
            graph = parse_flow(file.read_bytes())
        except FlowParseError as exc:
            raise CorpusError(f"{file.name}: {exc}") from exc
        flows.append((file.stem, graph.with_metadata(FlowMetadata(template_id=file.stem))))
    return flows


# ---------------------------------------------------------------------------
# Structural similarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class NodeSignature:
    """Id-independent description of a node."""

    class_type: str
    literal_inputs: tuple[tuple[str, str], ...]
    in_degree: int


def _literal_text(value: Scalar) -> str:
    return json.dumps(value, ensure_ascii=False)


def node_signatures(graph: WorkflowGraph) -> dict[str, NodeSignature]:
    """Map every NodeId to its signature."""
    signatures: dict[str, NodeSignature] = {}
    for node_id, node in graph.nodes.items():
        literal_inputs = tuple(sorted((name, _literal_text(v)) for name, v in node.literals()))
        in_degree = sum(1 for _ in node.links())
        signatures[node_id] = NodeSignature(node.class_type, literal_inputs, in_degree)
    return signatures


def _features(graph: WorkflowGraph) -> Counter:
    signatures = node_signatures(graph)
    features: Counter = Counter(("node", sig) for sig in signatures.values())
    for edge in graph.edges():
        features[("edge", signatures[edge.source], signatures[edge.target], edge.input_name)] += 1
    return features


def _jaccard(a: Counter, b: Counter) -> float:
    union = sum((a | b).values())
    if union == 0:
        return 1.0
    return sum((a & b).values()) / union


def flow_similarity(a: WorkflowGraph, b: WorkflowGraph) -> float:
    """Multiset Jaccard index over node signatures and signature-level edges."""
    return _jaccard(_features(a), _features(b))


def nearest_neighbor(
    query: WorkflowGraph,
    corpus: Iterable[tuple[str, WorkflowGraph]],
) -> tuple[str, float]:
    """Return the corpus entry most similar to ``query``.

    Ties go to the lexicographically smallest FlowId.

    Raises:
        EmptyCorpusError: If the corpus is empty.
    """
    query_features = _features(query)
    best: tuple[str, float] | None = None
    for flow_id, graph in sorted(corpus, key=lambda item: item[0]):
        score = _jaccard(query_features, _features(graph))
        if best is None or score > best[1]:
            best = (flow_id, score)
    if best is None:
        raise EmptyCorpusError("Nearest-neighbor search over an empty corpus")
    return best


# ---------------------------------------------------------------------------
# Prompt slots
# ---------------------------------------------------------------------------

TEXT_ENCODER_INPUTS: dict[str, tuple[str, ...]] = {
    "CLIPTextEncode": ("text",),
    "CLIPTextEncodeSDXL": ("text_g", "text_l"),
    "CLIPTextEncodeSDXLRefiner": ("text",),
    "CLIPTextEncodeSD3": ("clip_g", "clip_l", "t5xxl"),
    "CLIPTextEncodeFlux": ("clip_l", "t5xxl"),
    "BNK_CLIPTextEncodeAdvanced": ("text",),
}

SAMPLER_CLASS_TYPES = frozenset(
    {
        "KSampler",
        "KSamplerAdvanced",
        "SamplerCustom",
        "CFGGuider",
        "DualCFGGuider",
        "FaceDetailer",
        "UltimateSDUpscale",
    }
)

_CONDITIONING_INPUTS = ("positive", "negative")


class PromptSlots(NamedTuple):
    positive: list[tuple[str, str]]
    negative: list[tuple[str, str]]


def _encoder_inputs(node: Node) -> tuple[str, ...]:
    if node.class_type in TEXT_ENCODER_INPUTS:
        return TEXT_ENCODER_INPUTS[node.class_type]
    if "TextEncode" in node.class_type:
        return ("text",)
    return ()


def is_sampler(node: Node) -> bool:
    """True for nodes that consume positive/negative conditioning."""
    if node.class_type in SAMPLER_CLASS_TYPES:
        return True
    return "Sampler" in node.class_type and any(
        name in _CONDITIONING_INPUTS for name, _ in node.links()
    )


def _reached_polarities(
    graph: WorkflowGraph,
    start: str,
    consumers: Mapping[str, list[tuple[str, str]]],
) -> set[str]:
    polarities: set[str] = set()
    seen = {start}
    stack = [start]
    while stack:
        current = stack.pop()
        for target, input_name in consumers.get(current, []):
            if is_sampler(graph.nodes[target]):
                if input_name in _CONDITIONING_INPUTS:
                    polarities.add(input_name)
                continue
            if target not in seen:
                seen.add(target)
                stack.append(target)
    return polarities


def find_prompt_slots(graph: WorkflowGraph) -> PromptSlots:
    """Locate text inputs that receive the positive and negative prompt.

    A slot is positive when every sampler its encoder reaches is reached
    through a ``positive`` input, and negative likewise. Encoders with mixed
    wiring are skipped.

    Raises:
        NoPromptSlotError: If the flow has no positive prompt slot.
    """
    consumers: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for edge in graph.edges():
        consumers[edge.source].append((edge.target, edge.input_name))

    positive: list[tuple[str, str]] = []
    negative: list[tuple[str, str]] = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        names = [n for n in _encoder_inputs(node) if isinstance(node.inputs.get(n), str)]
        if not names:
            continue
        polarities = _reached_polarities(graph, node_id, consumers)
        if polarities == {"positive"}:
            positive.extend((node_id, n) for n in names)
        elif polarities == {"negative"}:
            negative.extend((node_id, n) for n in names)
        elif polarities:
            logger.warning("Text encoder %s feeds both positive and negative inputs", node_id)

    if not positive:
        raise NoPromptSlotError("Flow has no text input wired to a positive conditioning")
    return PromptSlots(positive=positive, negative=negative)
