"""Prompt category labeling."""

from __future__ import annotations

import logging
import re
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel

from flow_tailor.exceptions import NoLabelsAssignedError
from flow_tailor.llm.base import LLMClient
from flow_tailor.models import LabelAssignment, PromptRecord

logger = logging.getLogger(__name__)

DEFAULT_LABELS = [
    "People",
    "Photo-realistic",
    "Photo-artistic",
    "Fantasy",
    "Sci-fi",
    "Horror",
    "Anime",
    "Abstract",
    "Surreal",
    "Cyberpunk",
    "Steampunk",
    "Gothic",
    "Digital art",
    "Portrait",
    "Nature",
    "Landscape",
    "Wildlife",
    "Urban",
    "Cosmic",
    "Underwater",
]

LABELING_PROMPT = (
    "Given the following image prompt and list of labels, select the most relevant labels "
    "that describe the key elements, styles, or themes of the image this prompt might "
    "produce. Provide only the selected labels, separated by commas.\n\n"
    "Image prompt: [prompt]\n\n"
    "Available labels: [labels]\n\n"
    "Selected labels:"
)

DEFAULT_KEYWORDS: dict[str, list[str]] = {
    "People": ["person", "people", "man", "woman", "girl", "boy", "child", "crowd", "couple"],
    "Photo-realistic": [
        "photorealistic",
        "realistic",
        "photo",
        "photograph",
        "photography",
        "hyperrealistic",
        "dslr",
        "8k",
    ],
    "Photo-artistic": ["cinematic", "bokeh", "film grain", "analog", "long exposure"],
    "Fantasy": ["fantasy", "dragon", "elf", "wizard", "magic", "fairy", "castle", "unicorn"],
    "Sci-fi": ["sci-fi", "scifi", "spaceship", "robot", "futuristic", "alien", "android"],
    "Horror": ["horror", "creepy", "zombie", "ghost", "demon", "skull", "nightmare"],
    "Anime": ["anime", "manga", "chibi", "ghibli"],
    "Abstract": ["abstract", "geometric", "fractal", "minimalist", "pattern"],
    "Surreal": ["surreal", "dreamlike", "dreamy", "melting"],
    "Cyberpunk": ["cyberpunk", "neon", "cyborg"],
    "Steampunk": ["steampunk", "clockwork", "brass", "gear", "victorian"],
    "Gothic": ["gothic", "cathedral", "vampire"],
    "Digital art": ["digital art", "digital painting", "concept art", "artstation", "3d render"],
    "Portrait": ["portrait", "headshot", "close-up", "face"],
    "Nature": ["nature", "forest", "tree", "flower", "garden", "jungle", "plant"],
    "Landscape": ["landscape", "mountain", "valley", "vista", "desert", "lake"],
    "Wildlife": [
        "cat",
        "dog",
        "animal",
        "bird",
        "wolf",
        "fox",
        "lion",
        "tiger",
        "horse",
        "owl",
        "deer",
        "bear",
        "wildlife",
    ],
    "Urban": ["city", "street", "urban", "building", "skyline", "alley", "downtown"],
    "Cosmic": ["cosmic", "galaxy", "nebula", "planet", "universe", "astronaut", "outer space"],
    "Underwater": ["underwater", "ocean", "sea", "coral", "fish", "mermaid", "reef"],
}


def render_labeling_prompt(prompt_text: str, vocabulary: Sequence[str]) -> str:
    substitutions = {"prompt": prompt_text, "labels": ", ".join(vocabulary)}
    return re.sub(r"\[(prompt|labels)\]", lambda m: substitutions[m.group(1)], LABELING_PROMPT)


class LabelerClient(ABC):
    """Produces comma-separated label text for a prompt."""

    @abstractmethod
    def label(self, prompt_text: str, vocabulary: Sequence[str]) -> str:
        ...


class LLMLabeler(LabelerClient):
    """Asks an LLM to pick labels with the labeling prompt."""

    def __init__(self, llm: LLMClient) -> None:
        self.llm = llm

    def label(self, prompt_text: str, vocabulary: Sequence[str]) -> str:
        return self.llm.generate("", render_labeling_prompt(prompt_text, vocabulary))


class KeywordLabeler(LabelerClient):
    """Offline labeler matching keywords against lowercase prompt text."""

    def __init__(self, keywords: Mapping[str, Sequence[str]] | None = None) -> None:
        source = DEFAULT_KEYWORDS if keywords is None else keywords
        self._patterns = {
            label: [
                re.compile(rf"(?<![a-z0-9]){re.escape(kw.lower())}s?(?![a-z0-9])") for kw in words
            ]
            for label, words in source.items()
        }

    def matches(self, prompt_text: str, vocabulary: Sequence[str]) -> list[str]:
        text = prompt_text.lower()
        return [
            label
            for label in vocabulary
            if any(p.search(text) for p in self._patterns.get(label, []))
        ]

    def label(self, prompt_text: str, vocabulary: Sequence[str]) -> str:
        return ", ".join(self.matches(prompt_text, vocabulary))


def parse_labels(raw: str, vocabulary: Sequence[str], max_labels: int = 10) -> list[str]:
    """Vocabulary labels named in a comma/newline separated reply, in reply order."""
    canonical = {label.lower(): label for label in vocabulary}
    labels: list[str] = []
    for token in re.split(r"[,\n]", raw):
        name = token.strip().strip("'\"*.-").strip()
        label = canonical.get(name.lower())
        if label is not None and label not in labels:
            labels.append(label)
    return labels[:max_labels]


def assign_labels(
    prompt: PromptRecord,
    labeler: LabelerClient,
    vocabulary: Sequence[str],
    max_labels: int = 10,
) -> LabelAssignment:
    """Label one prompt.

    Raises:
        NoLabelsAssignedError: If no vocabulary label was produced.
    """
    if not vocabulary:
        raise ValueError("Label vocabulary must not be empty")
    labels = parse_labels(labeler.label(prompt.text, vocabulary), vocabulary, max_labels)
    if not labels:
        raise NoLabelsAssignedError(prompt.prompt_id)
    return LabelAssignment(prompt_id=prompt.prompt_id, labels=labels)


def assign_all(
    prompts: Sequence[PromptRecord],
    labeler: LabelerClient,
    vocabulary: Sequence[str],
    max_labels: int = 10,
    workers: int = 4,
) -> tuple[list[LabelAssignment], list[str]]:
    """Label every prompt; returns (assignments, discarded prompt ids)."""

    def _one(prompt: PromptRecord) -> LabelAssignment | None:
        try:
            return assign_labels(prompt, labeler, vocabulary, max_labels)
        except NoLabelsAssignedError:
            logger.info("Discarding prompt %s: no labels assigned", prompt.prompt_id)
            return None

    ordered = sorted(prompts, key=lambda p: p.prompt_id)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(_one, ordered))
    assignments = [r for r in results if r is not None]
    discarded = [p.prompt_id for p, r in zip(ordered, results, strict=True) if r is None]
    return assignments, discarded


class LabelStats(BaseModel):
    prompts: int
    labeled: int
    discarded: int
    mean_labels: float
    std_labels: float
    max_labels: int
    discard_rate: float


def label_stats(assignments: Sequence[LabelAssignment], discarded: Sequence[str]) -> LabelStats:
    """Labels-per-prompt statistics (population std) and discard rate."""
    counts = np.array([len(a.labels) for a in assignments], dtype=np.float64)
    total = len(counts) + len(discarded)
    return LabelStats(
        prompts=total,
        labeled=len(counts),
        discarded=len(discarded),
        mean_labels=float(counts.mean()) if counts.size else 0.0,
        std_labels=float(counts.std(ddof=0)) if counts.size else 0.0,
        max_labels=int(counts.max()) if counts.size else 0,
        discard_rate=len(discarded) / total if total else 0.0,
    )
