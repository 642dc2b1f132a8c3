"""Registry of swappable workflow components and the slots that hold them."""

from __future__ import annotations

import re
from collections.abc import Iterable
from pathlib import Path

from pydantic import BaseModel, Field, field_validator

from flow_tailor.enums import ComponentCategory
from flow_tailor.exceptions import NoPromptSlotError, RegistryError
from flow_tailor.graph import WorkflowGraph, find_prompt_slots

SlotKey = tuple[str, str]


class ComponentRef(BaseModel, frozen=True):
    """A named asset or setting of a fixed category."""

    name: str
    category: ComponentCategory

    @field_validator("name")
    @classmethod
    def _name_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("component name must be non-empty")
        return value


class ComponentRegistry(BaseModel):
    """Known components plus the node inputs they may be swapped into."""

    entries: list[ComponentRef] = []
    slot_rules: dict[SlotKey, ComponentCategory] = Field(default_factory=dict)

    def names(self, category: ComponentCategory) -> list[str]:
        """Registered names of a category, in registration order."""
        return [e.name for e in self.entries if e.category == category]

    def category_of(self, name: str) -> ComponentCategory | None:
        """Category a name is registered under, if any."""
        for entry in self.entries:
            if entry.name == name:
                return entry.category
        return None

    def effective_category(
        self, slot: SlotKey, current_value: object
    ) -> ComponentCategory | None:
        """Category governing a slot given the value it currently holds.

        A registered value keeps its own category, so a refiner loaded
        through a generic checkpoint loader stays a refiner.
        """
        rule = self.slot_rules.get(slot)
        if rule is None:
            return None
        if isinstance(current_value, str):
            registered = self.category_of(current_value)
            if registered is not None:
                return registered
        return rule

    def problems(self) -> list[str]:
        """Describe every invariant violation; empty when the registry is sound."""
        issues: list[str] = []
        seen: set[tuple[str, ComponentCategory]] = set()
        for entry in self.entries:
            key = (entry.name, entry.category)
            if key in seen:
                issues.append(f"duplicate entry {entry.category.value}/{entry.name}")
            seen.add(key)
        for (class_type, input_name), category in sorted(self.slot_rules.items()):
            if not self.names(category):
                issues.append(
                    f"slot rule {class_type}.{input_name} -> {category.value} has no entries"
                )
        return issues


def validate_registry(registry: ComponentRegistry) -> None:
    """Raise RegistryError if the registry violates its invariants."""
    issues = registry.problems()
    if issues:
        raise RegistryError("; ".join(issues))


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

_DEFAULT_COMPONENTS: dict[ComponentCategory, list[str]] = {
    ComponentCategory.base_model: [
        "AetherverseLightning v10",
        "AlbedobaseXL v13",
        "AnimagineXL v30",
        "AnythingXL",
        "crystalClearXL ccXL",
        "DreamshaperXL turboDpmppSDEKarras",
        "EnvyhyperdriveXL v10",
        "GleipnirV0.3",
        'JibMixXL v9 "BetterBodies"',
        "JuggernautXL v9 Rdphoto2Lightning",
        "LeosamsHelloworldXL v70",
        "Proteus v03",
        "RealismEngineSDXL v10",
        "RealvisXL v40 BakedVAE",
        "RealvisXL v40 LightningBakedVAE",
        "SDXL Base 1.0 0.9VAE",
        "SDXL Base 1.0",
        "SDVN7 - NijiStyleXL v1",
        "SSD-1B",
        "TurbovisionXL SuperFastXL V431BakedVAE",
        "Stable Cascade",
        "Pixart-Sigma",
    ],
    ComponentCategory.refiner: [
        "SDXL Refiner 1.0 0.9VAE",
        "SDXL Refiner 1.0",
    ],
    ComponentCategory.embedding: [
        "easynegative",
        "bad-hands-5",
        "nfixer",
    ],
    ComponentCategory.lora: [
        "Add-Detail XL",
        "EpicF4nta5yXL",
        "AnimeTarot",
        "JuggerCineXL2",
        "LCM LoRA SSD-1B",
        "LCM LoRA SDXL",
        "LogoRedmond",
        "MJ52 v2.0",
        "MJ52",
        "PerfectEyesXL",
        "Pixel-Art-XL v1.1",
        "Ral-Dissolve-SDXL",
        "SDXL Glass",
        "SDXLFaetastic v24",
        "Sinfully Stylish SDXL",
        "Werewolf SDXL",
        "WowifierXL v2",
        "XL more art-full-beta1",
    ],
    ComponentCategory.upscaler: [
        "4x NMKD Superscale - SP 178000 G",
        "4x UltraSharp",
        "RealESRGAN x2 plus",
    ],
    ComponentCategory.face_restore: [
        "codeformer",
        "GFPGAN v1.4",
    ],
    ComponentCategory.vae: [
        "SharpSpectrum VAEXL",
        "SDXL VAE fp16 fix",
        "SDXL VAE",
    ],
    ComponentCategory.sampler: [
        "euler",
        "euler_ancestral",
        "heun",
        "dpm_2",
        "dpm_2_ancestral",
        "lms",
        "dpmpp_2s_ancestral",
        "dpmpp_sde",
        "dpmpp_2m",
        "dpmpp_2m_sde",
        "dpmpp_3m_sde",
        "ddim",
        "uni_pc",
    ],
    ComponentCategory.scheduler: [
        "normal",
        "karras",
        "exponential",
        "sgm_uniform",
        "simple",
        "ddim_uniform",
    ],
}

_DEFAULT_SLOT_RULES: dict[SlotKey, ComponentCategory] = {
    ("CheckpointLoaderSimple", "ckpt_name"): ComponentCategory.base_model,
    ("CheckpointLoader", "ckpt_name"): ComponentCategory.base_model,
    ("UNETLoader", "unet_name"): ComponentCategory.base_model,
    ("LoraLoader", "lora_name"): ComponentCategory.lora,
    ("LoraLoaderModelOnly", "lora_name"): ComponentCategory.lora,
    ("VAELoader", "vae_name"): ComponentCategory.vae,
    ("UpscaleModelLoader", "model_name"): ComponentCategory.upscaler,
    ("FaceRestoreModelLoader", "model_name"): ComponentCategory.face_restore,
    ("KSampler", "sampler_name"): ComponentCategory.sampler,
    ("KSampler", "scheduler"): ComponentCategory.scheduler,
    ("KSamplerAdvanced", "sampler_name"): ComponentCategory.sampler,
    ("KSamplerAdvanced", "scheduler"): ComponentCategory.scheduler,
}


def register_defaults() -> ComponentRegistry:
    """Return a registry holding every known asset and the standard slot rules."""
    entries = [
        ComponentRef(name=name, category=category)
        for category, names in _DEFAULT_COMPONENTS.items()
        for name in names
    ]
    return ComponentRegistry(entries=entries, slot_rules=dict(_DEFAULT_SLOT_RULES))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def _data_lines(path: Path) -> Iterable[tuple[int, list[str]]]:
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, [field.strip() for field in line.split("\t")]


def _category(value: str, path: Path, lineno: int) -> ComponentCategory:
    try:
        return ComponentCategory(value)
    except ValueError as exc:
        raise RegistryError(f"{path}:{lineno}: unknown category {value!r}") from exc


def load_registry(registry_file: Path, slot_rules_file: Path) -> ComponentRegistry:
    """Read ``category<TAB>name`` and ``class_type<TAB>input<TAB>category`` files.

    Raises:
        RegistryError: On missing files, malformed lines, or invariant violations.
    """
    for path in (registry_file, slot_rules_file):
        if not path.exists():
            raise RegistryError(f"Registry file not found: {path}")

    entries: list[ComponentRef] = []
    for lineno, fields in _data_lines(registry_file):
        if len(fields) != 2:
            raise RegistryError(f"{registry_file}:{lineno}: expected category<TAB>name")
        entries.append(
            ComponentRef(name=fields[1], category=_category(fields[0], registry_file, lineno))
        )

    slot_rules: dict[SlotKey, ComponentCategory] = {}
    for lineno, fields in _data_lines(slot_rules_file):
        if len(fields) != 3:
            raise RegistryError(
                f"{slot_rules_file}:{lineno}: expected class_type<TAB>input_name<TAB>category"
            )
        slot_rules[(fields[0], fields[1])] = _category(fields[2], slot_rules_file, lineno)

    registry = ComponentRegistry(entries=entries, slot_rules=slot_rules)
    validate_registry(registry)
    return registry


def save_registry(
    registry: ComponentRegistry, registry_file: Path, slot_rules_file: Path
) -> None:
    """Write the registry in the tab-separated formats read by load_registry."""
    registry_file.parent.mkdir(parents=True, exist_ok=True)
    slot_rules_file.parent.mkdir(parents=True, exist_ok=True)
    registry_file.write_text(
        "".join(f"{e.category.value}\t{e.name}\n" for e in registry.entries),
        encoding="utf-8",
    )
    slot_rules_file.write_text(
        "".join(
            f"{class_type}\t{input_name}\t{category.value}\n"
            for (class_type, input_name), category in sorted(registry.slot_rules.items())
        ),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Component extraction
# ---------------------------------------------------------------------------

_EMBEDDING_REF = re.compile(r"embedding:([\w.\-]+)", re.IGNORECASE)


def extract_components(graph: WorkflowGraph, registry: ComponentRegistry) -> list[ComponentRef]:
    """List components a flow uses, one entry per occurrence.

    Slot-ruled inputs contribute their current value; prompt text contributes
    ``embedding:<name>`` references to registered embeddings.
    """
    found: list[ComponentRef] = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        for input_name, value in sorted(node.literals()):
            category = registry.effective_category((node.class_type, input_name), value)
            if category is not None and isinstance(value, str) and value:
                found.append(ComponentRef(name=value, category=category))

    embeddings = {n.lower(): n for n in registry.names(ComponentCategory.embedding)}
    try:
        slots = find_prompt_slots(graph)
    except NoPromptSlotError:
        return found
    for node_id, input_name in [*slots.positive, *slots.negative]:
        text = graph.nodes[node_id].inputs[input_name]
        for match in _EMBEDDING_REF.finditer(str(text)):
            name = embeddings.get(match.group(1).lower().removesuffix(".pt"))
            if name is not None:
                found.append(ComponentRef(name=name, category=ComponentCategory.embedding))
    return found
