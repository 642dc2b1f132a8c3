"""Instruction templates for flow selection and flow prediction.

Placeholders are substituted in a single pass, so user text containing a
placeholder name is never expanded twice.
"""

from __future__ import annotations

import re

SELECTION_PROMPT = (
    "[context]\n\n"
    "Please classify the following prompt into one of the flows mentioned above:\n\n"
    "[prompt]\n\n"
    "Provide the flow ID and a brief explanation for your classification."
)

FT_TEMPLATE = (
    "Below is a prompt that describes an image a user wants to generate, and a numerical "
    "score describing the quality of an image. Please output a ComfyUI workflow in json "
    "format that will create an image with this score when given the prompt.\n\n"
    ">>> Prompt:\n[prompt]\n\n"
    ">>> Score:\n[score]\n\n"
    ">>> Flow:\n"
)

PREDICT_BEST_TEMPLATE = (
    "Below is a prompt that describes an image a user wants to generate. Please output a "
    "ComfyUI workflow in json format that will create the highest quality image when given "
    "the prompt.\n\n"
    ">>> Prompt:\n[prompt]\n\n"
    ">>> Flow:\n"
)

_PLACEHOLDER = re.compile(r"\[(context|prompt|score)\]")


def fill(template: str, **values: str) -> str:
    """Replace ``[name]`` placeholders present in ``values``; others stay literal."""
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def format_score(value: float) -> str:
    return f"{value:.3f}"


def render_selection_prompt(context: str, prompt_text: str) -> str:
    return fill(SELECTION_PROMPT, context=context.rstrip("\n"), prompt=prompt_text)


def render_ft_instruction(template: str, prompt_text: str, score: float | None) -> str:
    values = {"prompt": prompt_text}
    if score is not None:
        values["score"] = format_score(score)
    return fill(template, **values)
