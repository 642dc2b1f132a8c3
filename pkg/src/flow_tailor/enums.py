"""Enumeration types for flow tailor."""

from enum import StrEnum


class ComponentCategory(StrEnum):
    """Categories of swappable workflow assets."""

    base_model = "base_model"
    refiner = "refiner"
    lora = "lora"
    embedding = "embedding"
    sampler = "sampler"
    scheduler = "scheduler"
    upscaler = "upscaler"
    face_restore = "face_restore"
    vae = "vae"


# Categories that name model assets (as opposed to sampling settings).
ASSET_CATEGORIES = frozenset(
    {
        ComponentCategory.base_model,
        ComponentCategory.refiner,
        ComponentCategory.lora,
        ComponentCategory.embedding,
        ComponentCategory.upscaler,
        ComponentCategory.face_restore,
    }
)


class MutationKind(StrEnum):
    """Kinds of template mutations used for corpus augmentation."""

    swap_component = "swap_component"
    change_guidance = "change_guidance"
    change_steps = "change_steps"
    swap_sampler = "swap_sampler"
    swap_scheduler = "swap_scheduler"


class SelectionMethod(StrEnum):
    """How a flow was chosen for a prompt."""

    in_context = "in_context"
    fine_tuned = "fine_tuned"
    fallback = "fallback"

