"""Template screening and corpus augmentation by component/parameter mutation."""

from __future__ import annotations

import hashlib
import logging
import math
from collections import Counter
from collections.abc import Iterable
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from flow_tailor.enums import ComponentCategory, MutationKind
from flow_tailor.exceptions import CorpusError, NoMatchingSlotError, NoPromptSlotError
from flow_tailor.graph import (
    TEXT_ENCODER_INPUTS,
    FlowMetadata,
    InputValue,
    WorkflowGraph,
    find_prompt_slots,
    serialize_flow,
)
from flow_tailor.registry import ComponentRegistry

logger = logging.getLogger(__name__)

_GUIDANCE_SLOTS = frozenset(
    {
        ("KSampler", "cfg"),
        ("KSamplerAdvanced", "cfg"),
        ("SamplerCustom", "cfg"),
        ("CFGGuider", "cfg"),
    }
)

_STEPS_SLOTS = frozenset(
    {
        ("KSampler", "steps"),
        ("KSamplerAdvanced", "steps"),
        ("BasicScheduler", "steps"),
    }
)

_SWAP_CATEGORY = {
    MutationKind.swap_sampler: ComponentCategory.sampler,
    MutationKind.swap_scheduler: ComponentCategory.scheduler,
}


class MutationSpec(BaseModel, frozen=True):
    """One kind of template edit.

    ``weight`` is the relative frequency of this spec inside a mutation mix.
    """

    kind: MutationKind
    category: ComponentCategory | None = None
    value_range: tuple[float, float] | None = None
    rng_seed: int = Field(default=0, ge=0)
    weight: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_kind_fields(self) -> MutationSpec:
        if self.kind == MutationKind.swap_component and self.category is None:
            raise ValueError("swap_component needs a category")
        if self.kind in (MutationKind.change_guidance, MutationKind.change_steps):
            if self.value_range is None:
                raise ValueError(f"{self.kind.value} needs a value_range")
            low, high = self.value_range
            if low > high:
                raise ValueError(f"value_range min {low} exceeds max {high}")
            if self.kind == MutationKind.change_steps and not (
                float(low).is_integer() and float(high).is_integer()
            ):
                raise ValueError("change_steps range must have integer bounds")
            if self.kind == MutationKind.change_guidance and not _value_grid(self):
                raise ValueError(f"change_guidance range {low:g}..{high:g} holds no 0.1 step")
        return self

    @property
    def swap_category(self) -> ComponentCategory | None:
        if self.kind == MutationKind.swap_component:
            return self.category
        return _SWAP_CATEGORY.get(self.kind)

    def describe(self) -> str:
        if self.swap_category is not None:
            return f"{self.kind.value}({self.swap_category.value})"
        low, high = self.value_range or (0, 0)
        return f"{self.kind.value}[{low:g},{high:g}]"


class AugmentationPlan(BaseModel):
    """How to grow a template set into a corpus."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    templates: list[tuple[str, WorkflowGraph]]
    mutations_per_template: int = Field(default=0, ge=0)
    mutation_mix: list[MutationSpec] = []
    seed: int = Field(default=0, ge=0)
    dedup: bool = True
    chain_length: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _mix_required(self) -> AugmentationPlan:
        if self.mutations_per_template > 0 and not self.mutation_mix:
            raise ValueError("mutation_mix must be non-empty when mutations are requested")
        return self


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------


def derive_seed(seed: int, template_id: str, index: int, purpose: str) -> int:
    """Counter-style key for one draw site, independent of iteration order."""
    material = f"{seed}:{template_id}:{index}:{purpose}".encode()
    return int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# Mutations
# ---------------------------------------------------------------------------


def matched_slots(
    graph: WorkflowGraph, spec: MutationSpec, registry: ComponentRegistry
) -> list[tuple[str, str, InputValue]]:
    """Inputs a mutation would touch, as sorted (node_id, input_name, value)."""
    matches: list[tuple[str, str, InputValue]] = []
    category = spec.swap_category
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        for input_name, value in sorted(node.literals()):
            key = (node.class_type, input_name)
            if category is not None:
                hit = (
                    isinstance(value, str)
                    and registry.effective_category(key, value) == category
                )
            elif spec.kind == MutationKind.change_guidance:
                hit = key in _GUIDANCE_SLOTS and isinstance(value, int | float)
                hit = hit and not isinstance(value, bool)
            else:
                hit = key in _STEPS_SLOTS and isinstance(value, int)
                hit = hit and not isinstance(value, bool)
            if hit:
                matches.append((node_id, input_name, value))
    return matches


def _value_grid(spec: MutationSpec) -> list[InputValue]:
    low, high = spec.value_range  # type: ignore[misc]
    if spec.kind == MutationKind.change_steps:
        return list(range(int(low), int(high) + 1))
    # tenths inside [low, high]
    first, last = math.ceil(round(low * 10, 6)), math.floor(round(high * 10, 6))
    return [k / 10 for k in range(first, last + 1)]


def _draw(
    rng: np.random.Generator,
    spec: MutationSpec,
    registry: ComponentRegistry,
    current: InputValue,
) -> InputValue:
    """Draw a replacement that differs from ``current`` whenever another value exists."""
    category = spec.swap_category
    if category is not None:
        pool: list[InputValue] = list(registry.names(category))
    else:
        pool = _value_grid(spec)
    candidates = [v for v in pool if v != current] or [current]
    return candidates[int(rng.integers(len(candidates)))]


def apply_mutation(
    graph: WorkflowGraph,
    spec: MutationSpec,
    registry: ComponentRegistry,
) -> WorkflowGraph:
    """Return a new graph with every input matched by ``spec`` redrawn.

    Draws come from a Philox generator keyed by ``spec.rng_seed``, so the
    result depends only on the inputs.

    Raises:
        NoMatchingSlotError: If no input matches the spec.
    """
    slots = matched_slots(graph, spec, registry)
    if not slots:
        raise NoMatchingSlotError(f"No input matches {spec.describe()}")

    rng = _rng(spec.rng_seed)
    updates: dict[tuple[str, str], InputValue] = {}
    log: list[str] = []
    for node_id, input_name, current in slots:
        new_value = _draw(rng, spec, registry, current)
        updates[(node_id, input_name)] = new_value
        log.append(f"{spec.describe()} {node_id}.{input_name}: {current!r} -> {new_value!r}")

    metadata = graph.metadata or FlowMetadata()
    mutated = graph.with_inputs(updates)
    return mutated.with_metadata(
        FlowMetadata(template_id=metadata.template_id, lineage=(*metadata.lineage, *log))
    )


# ---------------------------------------------------------------------------
# Corpus expansion
# ---------------------------------------------------------------------------


def _variant(
    template_id: str,
    template: WorkflowGraph,
    index: int,
    plan: AugmentationPlan,
    registry: ComponentRegistry,
) -> WorkflowGraph | None:
    weights = np.array([m.weight for m in plan.mutation_mix], dtype=float)
    picker = _rng(derive_seed(plan.seed, template_id, index, "pick"))
    graph = template
    applied = 0
    for step in range(plan.chain_length):
        choice = plan.mutation_mix[int(picker.choice(len(weights), p=weights / weights.sum()))]
        spec = choice.model_copy(
            update={"rng_seed": derive_seed(plan.seed, template_id, index, f"step{step}")}
        )
        try:
            graph = apply_mutation(graph, spec, registry)
        except NoMatchingSlotError:
            logger.debug("Skipping %s on %s: no matching slot", spec.describe(), template_id)
            continue
        applied += 1
    return graph if applied else None


def expand_corpus(
    plan: AugmentationPlan,
    registry: ComponentRegistry,
) -> list[tuple[str, WorkflowGraph]]:
    """Return the templates followed by their mutated variants.

    Variant ids are ``<template_id>__v<index>``; graph metadata carries the
    template id and the mutation log. With ``plan.dedup`` no two returned
    graphs share a canonical serialization.

    Raises:
        CorpusError: If a template cannot accept a user prompt.
    """
    templates = sorted(plan.templates, key=lambda item: item[0])
    for template_id, template in templates:
        try:
            find_prompt_slots(template)
        except NoPromptSlotError as exc:
            raise CorpusError(f"Template {template_id}: {exc}") from exc

    corpus: list[tuple[str, WorkflowGraph]] = []
    seen: dict[str, str] = {}

    def _add(flow_id: str, graph: WorkflowGraph) -> None:
        key = serialize_flow(graph)
        if plan.dedup and key in seen:
            logger.debug("Dropping %s: duplicate of %s", flow_id, seen[key])
            return
        seen.setdefault(key, flow_id)
        corpus.append((flow_id, graph))

    for template_id, template in templates:
        _add(template_id, template.with_metadata(FlowMetadata(template_id=template_id)))

    for template_id, template in templates:
        base = template.with_metadata(FlowMetadata(template_id=template_id))
        for index in range(plan.mutations_per_template):
            variant = _variant(template_id, base, index, plan, registry)
            if variant is not None:
                _add(f"{template_id}__v{index:03d}", variant)

    logger.info("Expanded %d templates into %d flows", len(templates), len(corpus))
    return corpus


# ---------------------------------------------------------------------------
# Template screening
# ---------------------------------------------------------------------------

CORE_CLASS_TYPES = frozenset(
    {
        "CheckpointLoaderSimple",
        "CheckpointLoader",
        "UNETLoader",
        "CLIPLoader",
        "DualCLIPLoader",
        "VAELoader",
        "LoraLoader",
        "LoraLoaderModelOnly",
        "CLIPSetLastLayer",
        "ConditioningCombine",
        "ConditioningConcat",
        "ConditioningAverage",
        "ConditioningSetArea",
        "EmptyLatentImage",
        "EmptySD3LatentImage",
        "KSampler",
        "KSamplerAdvanced",
        "SamplerCustom",
        "BasicScheduler",
        "CFGGuider",
        "VAEDecode",
        "VAEEncode",
        "SaveImage",
        "PreviewImage",
        "UpscaleModelLoader",
        "ImageUpscaleWithModel",
        "ImageScale",
        "ImageScaleBy",
        "LatentUpscale",
        "LatentUpscaleBy",
        "ModelSamplingDiscrete",
        "RescaleCFG",
        "FreeU_V2",
        *TEXT_ENCODER_INPUTS,
    }
)

_VIDEO_MARKERS = ("Video", "AnimateDiff", "SVD_img2vid", "VHS_")
_CONTROL_IMAGE_MARKERS = ("LoadImage", "ControlNet", "IPAdapter")


class ScreenResult(NamedTuple):
    kept: list[tuple[str, WorkflowGraph]]
    rejected: dict[str, str]


def _first_marker(graph: WorkflowGraph, markers: Iterable[str]) -> str | None:
    markers = tuple(markers)
    for node in graph.nodes.values():
        if any(marker in node.class_type for marker in markers):
            return node.class_type
    return None


def screen_templates(
    templates: list[tuple[str, WorkflowGraph]],
    *,
    max_json_bytes: int = 200_000,
    min_block_frequency: int = 3,
    core_class_types: frozenset[str] = CORE_CLASS_TYPES,
) -> ScreenResult:
    """Apply the corpus-ingest filters to candidate templates.

    Flows are dropped, in order, for video blocks, control-image inputs,
    oversized JSON, missing prompt slots, and finally for community blocks
    used by fewer than ``min_block_frequency`` of the surviving flows.
    """
    rejected: dict[str, str] = {}
    survivors: list[tuple[str, WorkflowGraph]] = []
    for flow_id, graph in sorted(templates, key=lambda item: item[0]):
        if block := _first_marker(graph, _VIDEO_MARKERS):
            rejected[flow_id] = f"video block {block}"
        elif block := _first_marker(graph, _CONTROL_IMAGE_MARKERS):
            rejected[flow_id] = f"control image block {block}"
        elif (size := len(serialize_flow(graph).encode("utf-8"))) > max_json_bytes:
            rejected[flow_id] = f"JSON size {size} exceeds {max_json_bytes} bytes"
        elif _has_no_prompt_slot(graph):
            rejected[flow_id] = "no prompt slot"
        else:
            survivors.append((flow_id, graph))

    frequency: Counter[str] = Counter()
    for _, graph in survivors:
        frequency.update({n.class_type for n in graph.nodes.values()})

    kept: list[tuple[str, WorkflowGraph]] = []
    for flow_id, graph in survivors:
        rare = sorted(
            n.class_type
            for n in graph.nodes.values()
            if n.class_type not in core_class_types
            and frequency[n.class_type] < min_block_frequency
        )
        if rare:
            rejected[flow_id] = f"rare community block {rare[0]}"
        else:
            kept.append((flow_id, graph))

    for flow_id, reason in rejected.items():
        logger.info("Screened out %s: %s", flow_id, reason)
    return ScreenResult(kept=kept, rejected=rejected)


def _has_no_prompt_slot(graph: WorkflowGraph) -> bool:
    try:
        find_prompt_slots(graph)
    except NoPromptSlotError:
        return True
    return False


__all__ = [
    "AugmentationPlan",
    "MutationSpec",
    "ScreenResult",
    "apply_mutation",
    "derive_seed",
    "expand_corpus",
    "matched_slots",
    "screen_templates",
]
