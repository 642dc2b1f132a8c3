"""Flows x labels score table, median filter and context rendering."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Sequence

import numpy as np

from flow_tailor.exceptions import EmptyDatasetError
from flow_tailor.models import LabelAssignment, ScoredTriplet, ScoreTable

logger = logging.getLogger(__name__)


def build_table(
    triplets: Sequence[ScoredTriplet],
    assignments: Sequence[LabelAssignment],
    vocabulary: Sequence[str] | None = None,
) -> ScoreTable:
    """Mean ensemble score per (flow, label), unweighted over prompts.

    Unscored triplets and triplets of prompts without an assignment are
    ignored. Columns follow ``vocabulary`` when given, else the sorted set of
    assigned labels.

    Raises:
        EmptyDatasetError: If no triplet has a labeled prompt.
    """
    labels_of = {a.prompt_id: a.labels for a in assignments}
    scores: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for triplet in triplets:
        if triplet.ensemble is None:
            continue
        for label in labels_of.get(triplet.prompt_id, []):
            scores[triplet.flow_id][label].append(triplet.ensemble)
    if not scores:
        raise EmptyDatasetError("No triplet belongs to a labeled prompt")

    if vocabulary is None:
        columns = sorted({label for labels in labels_of.values() for label in labels})
    else:
        columns = list(vocabulary)
    flow_ids = sorted(scores)
    cells = {
        f: {label: math.fsum(v) / len(v) for label, v in scores[f].items() if label in columns}
        for f in flow_ids
    }
    support = {
        f: {label: len(v) for label, v in scores[f].items() if label in columns} for f in flow_ids
    }
    return ScoreTable(
        flow_ids=flow_ids,
        labels=columns,
        cells=cells,
        support=support,
        kept={f: True for f in flow_ids},
    )


def label_medians(table: ScoreTable) -> dict[str, float]:
    """Median of present cells per label; labels with no cells are omitted."""
    medians: dict[str, float] = {}
    for label in table.labels:
        values = [v for f in table.flow_ids if (v := table.cell(f, label)) is not None]
        if values:
            medians[label] = float(np.median(values))
    return medians


def median_filter(table: ScoreTable) -> ScoreTable:
    """Discard flows strictly below the label median in every label they have.

    Cells are retained; only ``kept`` changes.
    """
    if len(table.flow_ids) < 2:
        logger.warning("Median filter needs at least 2 flows; keeping all")
        return table.model_copy(update={"kept": {f: True for f in table.flow_ids}})

    medians = label_medians(table)
    kept: dict[str, bool] = {}
    for flow_id in table.flow_ids:
        present = {
            label: value
            for label in table.labels
            if (value := table.cell(flow_id, label)) is not None
        }
        kept[flow_id] = any(value >= medians[label] for label, value in present.items())

    discarded = sum(1 for k in kept.values() if not k)
    logger.info(
        "Median filter discarded %d of %d flows (%.0f%%)",
        discarded,
        len(kept),
        100.0 * discarded / len(kept),
    )
    return table.model_copy(update={"kept": kept})


def render_context(table: ScoreTable, precision: int = 3) -> str:
    """Plain-text table of kept flows sorted by FlowId; absent cells are ``-``."""
    lines = [" | ".join(["flow_id", *table.labels])]
    for flow_id in table.kept_flows():
        cells = []
        for label in table.labels:
            value = table.cell(flow_id, label)
            cells.append("-" if value is None else f"{value:.{precision}f}")
        lines.append(" | ".join([flow_id, *cells]))
    return "\n".join(lines) + "\n"


def estimate_tokens(text: str) -> int:
    """Rough token count at four characters per token."""
    return math.ceil(len(text) / 4)
