"""Post-hoc analyses of selections: component TF-IDF, diversity, originality."""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel

from flow_tailor.enums import ASSET_CATEGORIES, ComponentCategory
from flow_tailor.exceptions import EmptyCorpusError
from flow_tailor.graph import WorkflowGraph, nearest_neighbor
from flow_tailor.models import LabelAssignment, SelectionResult
from flow_tailor.registry import ComponentRef, ComponentRegistry, extract_components


class LabelDocument(BaseModel):
    """Components of every flow selected for prompts carrying one label."""

    label: str
    terms: list[ComponentRef] = []


class TermScore(BaseModel):
    name: str
    score: float


class TfIdfReport(BaseModel):
    """label -> category -> terms ranked by descending score, ties by name."""

    rankings: dict[str, dict[str, list[TermScore]]] = {}

    def top(self, label: str, category: ComponentCategory) -> TermScore | None:
        ranked = self.rankings.get(label, {}).get(category.value, [])
        return ranked[0] if ranked else None


class DiversityStats(BaseModel):
    unique_flows: int
    usage_histogram: dict[str, int]


class OriginalityStats(BaseModel):
    count: int
    mean_nn_similarity: float | None
    histogram: list[tuple[float, float, int]]


class AnalysisReport(BaseModel):
    tfidf: TfIdfReport | None = None
    diversity: DiversityStats | None = None
    originality: OriginalityStats | None = None
    components: dict[str, list[tuple[str, int]]] | None = None


def _asset_components(graph: WorkflowGraph, registry: ComponentRegistry) -> list[ComponentRef]:
    return [c for c in extract_components(graph, registry) if c.category in ASSET_CATEGORIES]


def build_label_documents(
    selections: Sequence[SelectionResult],
    assignments: Sequence[LabelAssignment],
    registry: ComponentRegistry,
) -> list[LabelDocument]:
    """One document per label that occurs on a selected prompt, sorted by label."""
    labels_of = {a.prompt_id: a.labels for a in assignments}
    documents: dict[str, LabelDocument] = {}
    for selection in selections:
        labels = labels_of.get(selection.prompt_id, [])
        if not labels:
            continue
        components = _asset_components(selection.graph, registry)
        for label in labels:
            document = documents.setdefault(label, LabelDocument(label=label))
            document.terms.extend(components)
    return [documents[label] for label in sorted(documents)]


def tfidf_rank(documents: Sequence[LabelDocument], smooth: bool = False) -> TfIdfReport:
    """Rank each document's terms by tf * idf, per component category.

    ``idf = ln(N / df)``, or ``ln(1 + N / df)`` with ``smooth``. Only terms
    occurring in a document are ranked for it.
    """
    if not documents:
        return TfIdfReport()
    vocabulary = sorted({(t.category.value, t.name) for d in documents for t in d.terms})
    index = {term: i for i, term in enumerate(vocabulary)}
    tf = np.zeros((len(documents), len(vocabulary)), dtype=np.float64)
    for row, document in enumerate(documents):
        for term in document.terms:
            tf[row, index[(term.category.value, term.name)]] += 1.0

    n_docs = float(len(documents))
    df = (tf > 0).sum(axis=0).astype(np.float64)
    ratio = np.divide(n_docs, df, out=np.ones_like(df), where=df > 0)
    idf = np.log1p(ratio) if smooth else np.log(ratio)
    scores = tf * idf

    rankings: dict[str, dict[str, list[TermScore]]] = {}
    for row, document in enumerate(documents):
        per_category: dict[str, list[TermScore]] = {}
        for col, (category, name) in enumerate(vocabulary):
            if tf[row, col] > 0:
                per_category.setdefault(category, []).append(
                    TermScore(name=name, score=float(scores[row, col]))
                )
        rankings[document.label] = {
            category: sorted(terms, key=lambda t: (-t.score, t.name))
            for category, terms in sorted(per_category.items())
        }
    return TfIdfReport(rankings=rankings)


def diversity_stats(selections: Sequence[SelectionResult]) -> DiversityStats:
    counts = Counter(s.flow_id for s in selections)
    return DiversityStats(
        unique_flows=len(counts),
        usage_histogram={flow_id: counts[flow_id] for flow_id in sorted(counts)},
    )


def originality_stats(
    selections: Sequence[SelectionResult],
    corpus: Sequence[tuple[str, WorkflowGraph]],
    bins: int = 10,
) -> OriginalityStats:
    """Nearest-neighbor similarity of each selected (unbound) flow to the corpus.

    Raises:
        EmptyCorpusError: If the corpus is empty.
    """
    if not corpus:
        raise EmptyCorpusError("Originality needs a non-empty corpus")
    values = [nearest_neighbor(s.graph, corpus)[1] for s in selections]
    if not values:
        return OriginalityStats(count=0, mean_nn_similarity=None, histogram=[])
    counts, edges = np.histogram(np.array(values), bins=bins, range=(0.0, 1.0))
    return OriginalityStats(
        count=len(values),
        mean_nn_similarity=math.fsum(values) / len(values),
        histogram=[(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)],
    )


def component_frequencies(
    selections: Sequence[SelectionResult],
    registry: ComponentRegistry,
) -> dict[str, list[tuple[str, int]]]:
    """Usage count of each asset across all selections, ranked per category."""
    counts: Counter[tuple[str, str]] = Counter()
    for selection in selections:
        for ref in _asset_components(selection.graph, registry):
            counts[(ref.category.value, ref.name)] += 1
    ranked: dict[str, list[tuple[str, int]]] = {}
    for (category, name), count in counts.items():
        ranked.setdefault(category, []).append((name, count))
    return {
        category: sorted(items, key=lambda item: (-item[1], item[0]))
        for category, items in sorted(ranked.items())
    }


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_report(report: AnalysisReport, top_n: int = 3) -> str:
    """Human-readable text rendering of whichever sections the report holds."""
    lines: list[str] = []
    if report.tfidf is not None:
        lines.append("Top components by TF-IDF")
        for label, categories in report.tfidf.rankings.items():
            for category, terms in categories.items():
                shown = ", ".join(f"{t.name} ({t.score:.3f})" for t in terms[:top_n])
                lines.append(f"  {label:<16} {category:<13} {shown}")
        lines.append("")
    if report.components is not None:
        lines.append("Component usage (General)")
        for category, items in report.components.items():
            shown = ", ".join(f"{name} x{count}" for name, count in items[:top_n])
            lines.append(f"  {category:<13} {shown}")
        lines.append("")
    if report.diversity is not None:
        lines.append(f"Unique flows: {report.diversity.unique_flows}")
        for flow_id, count in report.diversity.usage_histogram.items():
            lines.append(f"  {flow_id:<32} {count}")
        lines.append("")
    if report.originality is not None:
        mean = report.originality.mean_nn_similarity
        shown = "n/a" if mean is None else f"{mean:.4f}"
        lines.append(
            f"Mean nearest-neighbor similarity: {shown} over {report.originality.count} selections"
        )
        for low, high, count in report.originality.histogram:
            lines.append(f"  [{low:.1f}, {high:.1f}) {count}")
        lines.append("")
    return "\n".join(lines)


def report_json(report: AnalysisReport) -> str:
    return json.dumps(report.model_dump(mode="json", exclude_none=True), indent=2)
