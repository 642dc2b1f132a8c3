"""Tests for flow_tailor.analysis."""

import json
import math
import random

import pytest

from flow_tailor.analysis import (
    AnalysisReport,
    LabelDocument,
    build_label_documents,
    component_frequencies,
    diversity_stats,
    originality_stats,
    render_report,
    report_json,
    tfidf_rank,
)
from flow_tailor.enums import ComponentCategory, SelectionMethod
from flow_tailor.exceptions import EmptyCorpusError
from flow_tailor.models import LabelAssignment, SelectionResult
from flow_tailor.registry import ComponentRef


def _selection(prompt_id: str, flow_id: str, graph) -> SelectionResult:
    return SelectionResult(
        prompt_id=prompt_id,
        flow_id=flow_id,
        method=SelectionMethod.fallback,
        graph=graph,
        resolved_graph=graph,
    )


def _ref(name: str, category: ComponentCategory = ComponentCategory.base_model) -> ComponentRef:
    return ComponentRef(name=name, category=category)


@pytest.fixture()
def selections(templates):
    flows = dict(templates)
    return [
        _selection("p1", "portrait_facefix", flows["portrait_facefix"]),
        _selection("p2", "anime_vae", flows["anime_vae"]),
        _selection("p3", "anime_vae", flows["anime_vae"]),
    ]


@pytest.fixture()
def assignments():
    return [
        LabelAssignment(prompt_id="p1", labels=["Portrait"]),
        LabelAssignment(prompt_id="p2", labels=["Anime"]),
        LabelAssignment(prompt_id="p3", labels=["Anime", "Fantasy"]),
    ]


# ---------------------------------------------------------------------------
# TF-IDF
# ---------------------------------------------------------------------------


class TestLabelDocuments:
    def test_one_document_per_label(self, selections, assignments, registry):
        documents = build_label_documents(selections, assignments, registry)

        assert [d.label for d in documents] == ["Anime", "Fantasy", "Portrait"]
        anime = documents[0]
        assert anime.terms.count(_ref("AnimagineXL v30")) == 2

    def test_assets_only(self, selections, assignments, registry):
        documents = build_label_documents(selections, assignments, registry)
        categories = {t.category for d in documents for t in d.terms}
        assert ComponentCategory.sampler not in categories
        assert ComponentCategory.vae not in categories

    def test_unlabeled_selections_skipped(self, selections, registry):
        assert build_label_documents(selections, [], registry) == []


class TestTfIdfRank:
    def test_scores(self, selections, assignments, registry):
        report = tfidf_rank(build_label_documents(selections, assignments, registry))

        anime = report.top("Anime", ComponentCategory.base_model)
        portrait = report.top("Portrait", ComponentCategory.face_restore)
        assert anime.name == "AnimagineXL v30"
        assert anime.score == pytest.approx(2 * math.log(3 / 2))
        assert portrait.name == "GFPGAN v1.4"
        assert portrait.score == pytest.approx(math.log(3))

    def test_smoothing(self, selections, assignments, registry):
        documents = build_label_documents(selections, assignments, registry)
        report = tfidf_rank(documents, smooth=True)
        top = report.top("Anime", ComponentCategory.base_model)
        assert top.score == pytest.approx(2 * math.log(1 + 3 / 2))

    def test_term_in_every_document_scores_zero(self):
        documents = [
            LabelDocument(label="A", terms=[_ref("shared"), _ref("rare")]),
            LabelDocument(label="B", terms=[_ref("shared")]),
        ]

        report = tfidf_rank(documents)

        ranked = report.rankings["A"]["base_model"]
        assert [t.name for t in ranked] == ["rare", "shared"]
        assert ranked[1].score == 0.0

    def test_matches_brute_force(self):
        rng = random.Random(23)
        pool = [_ref(f"model_{i}") for i in range(8)]
        pool += [_ref(f"lora_{i}", ComponentCategory.lora) for i in range(6)]
        documents = [
            LabelDocument(label=f"L{d}", terms=[*rng.choices(pool, k=49), _ref("everywhere")])
            for d in range(5)
        ]

        report = tfidf_rank(documents)

        for document in documents:
            ranked = report.rankings[document.label]
            got = {(category, t.name): t.score for category, ts in ranked.items() for t in ts}
            expected = {}
            for term in set(document.terms):
                tf = sum(1 for t in document.terms if t == term)
                df = sum(1 for other in documents if term in other.terms)
                expected[(term.category.value, term.name)] = tf * math.log(5 / df)
            assert got.keys() == expected.keys()
            for key, score in expected.items():
                assert abs(got[key] - score) < 1e-12
            assert got[("base_model", "everywhere")] == 0.0
            for terms in ranked.values():
                scores = [t.score for t in terms]
                assert scores == sorted(scores, reverse=True)

    def test_ties_by_name(self):
        documents = [LabelDocument(label="A", terms=[_ref("b"), _ref("a")])]
        ranked = tfidf_rank(documents, smooth=True).rankings["A"]["base_model"]
        assert [t.name for t in ranked] == ["a", "b"]

    def test_empty(self):
        assert tfidf_rank([]).rankings == {}

    def test_missing_label(self):
        assert tfidf_rank([]).top("Anime", ComponentCategory.lora) is None


# ---------------------------------------------------------------------------
# Diversity and originality
# ---------------------------------------------------------------------------


class TestDiversity:
    def test_usage_counts(self, selections):
        stats = diversity_stats(selections)
        assert stats.unique_flows == 2
        assert stats.usage_histogram == {"anime_vae": 2, "portrait_facefix": 1}

    def test_empty(self):
        assert diversity_stats([]).unique_flows == 0


class TestOriginality:
    def test_corpus_flows_are_not_original(self, selections, templates):
        stats = originality_stats(selections, templates)

        assert stats.count == 3
        assert stats.mean_nn_similarity == pytest.approx(1.0)
        assert len(stats.histogram) == 10
        assert stats.histogram[-1][2] == 3

    def test_novel_flow(self, templates):
        novel = templates[0][1].with_inputs({("3", "steps"): 99})
        stats = originality_stats([_selection("p1", "x", novel)], templates)
        assert 0.0 < stats.mean_nn_similarity < 1.0

    def test_no_selections(self, templates):
        stats = originality_stats([], templates)
        assert stats.count == 0
        assert stats.mean_nn_similarity is None

    def test_empty_corpus(self, selections):
        with pytest.raises(EmptyCorpusError):
            originality_stats(selections, [])


class TestComponentFrequencies:
    def test_ranked_per_category(self, selections, registry):
        frequencies = component_frequencies(selections, registry)
        assert frequencies["base_model"] == [("AnimagineXL v30", 2), ("SDXL Base 1.0", 1)]
        assert "sampler" not in frequencies


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


class TestRendering:
    def test_text_sections(self, selections, assignments, templates, registry):
        report = AnalysisReport(
            tfidf=tfidf_rank(build_label_documents(selections, assignments, registry)),
            diversity=diversity_stats(selections),
            originality=originality_stats(selections, templates),
        )

        text = render_report(report)

        assert "Top components by TF-IDF" in text
        assert "AnimagineXL v30" in text
        assert "Unique flows: 2" in text
        assert "Mean nearest-neighbor similarity: 1.0000 over 3 selections" in text
        assert "Component usage" not in text

    def test_json_omits_missing_sections(self, selections):
        report = AnalysisReport(diversity=diversity_stats(selections))
        data = json.loads(report_json(report))
        assert set(data) == {"diversity"}
        assert data["diversity"]["unique_flows"] == 2
