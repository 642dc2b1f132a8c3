"""Tests for flow_tailor.pipeline."""

import logging

import numpy as np
import pytest

from flow_tailor.exceptions import PipelineError, StoreError
from flow_tailor.executor.base import MockExecutorClient
from flow_tailor.models import EnsembleConfig, GenerationJob, ImageHandle, PromptRecord
from flow_tailor.pipeline import ScoreMatrixRunner, run_matrix
from flow_tailor.scorers.base import SCORER_RANGES, SyntheticScorer
from flow_tailor.scoring import aggregate_score, fit_standardization
from flow_tailor.store import TripletStore
from tests.conftest import make_triplet

FIXED_TIME = "2026-01-01T00:00:00+00:00"


@pytest.fixture()
def store(tmp_path):
    return TripletStore(tmp_path / "triplets.jsonl")


@pytest.fixture()
def scorers():
    return [SyntheticScorer(name) for name in SCORER_RANGES]


@pytest.fixture()
def corpus(templates):
    return templates[:2]


def _runner(store, scorers, executor=None, **options):
    return ScoreMatrixRunner(
        store,
        executor or MockExecutorClient(),
        scorers,
        EnsembleConfig(),
        clock=lambda: FIXED_TIME,
        **options,
    )


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


class TestMatrixRun:
    def test_scores_every_pair(self, store, scorers, prompts, corpus):
        run = _runner(store, scorers).run(prompts, corpus)

        assert run.total_pairs == 6
        assert run.submitted == 6
        assert run.written == 6
        assert run.failures == []
        assert len(store.read_all()) == 6

    def test_records_in_prompt_then_flow_order(self, store, scorers, prompts, corpus):
        _runner(store, scorers).run(list(reversed(prompts)), list(reversed(corpus)))

        pairs = [(t.prompt_id, t.flow_id) for t in store.read_all()]
        assert pairs == sorted(pairs)

    def test_writes_fitted_sidecar(self, store, scorers, prompts, corpus):
        _runner(store, scorers).run(prompts, corpus)

        config = store.read_config()
        assert config is not None
        assert set(config.standardization_stats) == set(SCORER_RANGES)
        for triplet in store.read_all():
            assert abs(triplet.ensemble - aggregate_score(triplet.raw, config)) < 1e-9

    def test_triplet_fields(self, store, scorers, prompts, corpus):
        _runner(store, scorers, seed=11).run(prompts, corpus)
        triplet = store.read_all()[0]
        assert triplet.seed == 11
        assert triplet.timestamp == FIXED_TIME
        assert set(triplet.raw) == set(SCORER_RANGES)

    def test_same_result_for_any_worker_count(self, tmp_path, scorers, prompts, corpus):
        serial = TripletStore(tmp_path / "serial.jsonl")
        pooled = TripletStore(tmp_path / "pooled.jsonl")

        _runner(serial, scorers, workers=1).run(prompts, corpus)
        _runner(pooled, scorers, workers=4).run(prompts, corpus)

        assert serial.read_all() == pooled.read_all()

    def test_prompt_bound_before_generation(self, store, scorers, prompts, corpus):
        executor = MockExecutorClient()
        _runner(store, scorers, executor).run(prompts[:1], corpus[:1])
        assert executor.calls == [("p1", corpus[0][0], 0)]

    def test_empty_inputs(self, store, scorers, prompts):
        with pytest.raises(PipelineError):
            _runner(store, scorers).run(prompts, [])


# ---------------------------------------------------------------------------
# Resume and failures
# ---------------------------------------------------------------------------


class TestResume:
    def test_second_run_skips_completed(self, store, scorers, prompts, corpus):
        _runner(store, scorers).run(prompts, corpus)
        executor = MockExecutorClient()

        run = _runner(store, scorers, executor).run(prompts, corpus)

        assert run.skipped == 6
        assert run.written == 0
        assert executor.calls == []
        assert len(store.read_all()) == 6

    def test_failed_pair_retried_and_stats_refitted(self, store, scorers, prompts, corpus):
        failing = MockExecutorClient(fail_pairs=[("p2", corpus[0][0])])
        first = _runner(store, scorers, failing).run(prompts, corpus)

        assert first.written == 5
        assert len(first.failures) == 1
        assert first.failures[0].prompt_id == "p2"
        assert "Injected failure" in first.failures[0].error

        second = _runner(store, scorers).run(prompts, corpus)

        assert second.written == 1
        stored = store.read_all()
        expected = fit_standardization([t.raw for t in stored], list(SCORER_RANGES))
        fitted = store.read_config().standardization_stats
        for name, stats in expected.items():
            assert fitted[name].mean == pytest.approx(stats.mean, abs=1e-12)
            assert fitted[name].std == pytest.approx(stats.std, abs=1e-12)
        assert store.completed_pairs() == {(p.prompt_id, f) for p in prompts for f, _ in corpus}

    def test_failure_is_logged(self, store, scorers, prompts, corpus, caplog):
        failing = MockExecutorClient(fail_pairs=[("p1", corpus[0][0])])
        with caplog.at_level(logging.ERROR):
            _runner(store, scorers, failing).run(prompts, corpus)
        assert f"Pair p1/{corpus[0][0]} failed" in caplog.text

    def test_all_failed_writes_nothing(self, store, scorers, prompts, corpus):
        every_pair = [(p.prompt_id, f) for p in prompts for f, _ in corpus]
        failing = MockExecutorClient(fail_pairs=every_pair)
        run = _runner(store, scorers, failing).run(prompts, corpus)
        assert run.written == 0
        assert not store.path.exists()
        assert store.read_config() is None

    def test_offline_scorer_fails_pairs(self, store, prompts, corpus):
        scorers = [SyntheticScorer("aesthetic"), SyntheticScorer("hps", offline=True)]
        run = _runner(store, scorers).run(prompts, corpus)
        assert len(run.failures) == 6

    def test_records_without_sidecar(self, store, scorers, prompts, corpus):
        store.append(make_triplet("p9", "orphan", 0.5))
        with pytest.raises(StoreError, match="no sidecar"):
            _runner(store, scorers).run(prompts, corpus)


class _RaisingExecutor(MockExecutorClient):
    """Raises ``error`` for one pair, behaves like the mock otherwise."""

    def __init__(self, pair: tuple[str, str], error: BaseException) -> None:
        super().__init__()
        self.pair = pair
        self.error = error

    def generate(self, job: GenerationJob) -> ImageHandle:
        if (job.prompt_id, job.flow_id) == self.pair:
            raise self.error
        return super().generate(job)


class TestUnexpectedErrors:
    def test_non_domain_error_becomes_pair_failure(self, store, scorers, prompts, corpus):
        executor = _RaisingExecutor(("p2", corpus[1][0]), KeyError("filename"))

        run = _runner(store, scorers, executor).run(prompts, corpus)

        assert run.written == 5
        assert [(f.prompt_id, f.flow_id) for f in run.failures] == [("p2", corpus[1][0])]
        assert "filename" in run.failures[0].error
        assert len(store.read_all()) == 5

    def test_each_pair_appended_as_it_completes(self, store, scorers, prompts, corpus, monkeypatch):
        appended: list[str] = []
        original = store.append

        def _spy(record):
            appended.append(record.prompt_id)
            original(record)

        monkeypatch.setattr(store, "append", _spy)
        _runner(store, scorers).run(prompts, corpus)

        assert len(appended) == 6

    def test_interrupt_keeps_store_readable(self, store, scorers, prompts, corpus):
        executor = _RaisingExecutor(("p2", corpus[0][0]), KeyboardInterrupt())

        with pytest.raises(KeyboardInterrupt):
            _runner(store, scorers, executor, workers=1).run(prompts, corpus)

        assert ("p2", corpus[0][0]) not in store.completed_pairs()
        if store.path.exists():
            assert store.read_config() is not None


# ---------------------------------------------------------------------------
# Standardization over the stored corpus
# ---------------------------------------------------------------------------


def _numbered_prompts(count: int) -> list[PromptRecord]:
    return [PromptRecord(prompt_id=f"p{i:02d}", text=f"test prompt {i}") for i in range(count)]


class TestSmallStore:
    def test_single_pair_is_kept_unscored(self, store, scorers, prompts, corpus):
        run = _runner(store, scorers).run(prompts[:1], corpus[:1])

        assert run.written == 1
        assert run.triplets[0].ensemble is None
        assert store.read_all()[0].raw == run.triplets[0].raw
        assert store.read_scored() == []
        assert store.read_config().standardization_stats is None

    def test_later_run_scores_deferred_triplets(self, store, scorers, prompts, corpus):
        _runner(store, scorers).run(prompts[:1], corpus[:1])
        run = _runner(store, scorers).run(prompts, corpus[:1])

        assert run.written == 2
        stored = store.read_all()
        assert len(stored) == 3
        assert all(t.ensemble is not None for t in stored)
        config = store.read_config()
        for triplet in stored:
            assert abs(triplet.ensemble - aggregate_score(triplet.raw, config)) < 1e-9

    def test_lone_success_among_failures_is_kept(self, store, scorers, prompts, templates):
        corpus = templates[:3]
        survivor = ("p1", corpus[0][0])
        every_pair = [(p.prompt_id, f) for p in prompts[:2] for f, _ in corpus]
        failing = [pair for pair in every_pair if pair != survivor]

        run = _runner(store, scorers, MockExecutorClient(fail_pairs=failing)).run(
            prompts[:2], corpus
        )

        assert len(run.failures) == 5
        assert store.completed_pairs() == {survivor}


class TestRefit:
    def test_growing_store_is_standardized_over_all_vectors(self, store, scorers, templates):
        prompts = _numbered_prompts(30)
        corpus = templates[:5]

        _runner(store, scorers).run(prompts[:1], corpus)
        _runner(store, scorers).run(prompts, corpus)

        stored = store.read_all()
        config = store.read_config()
        assert len(stored) == 150
        for name in config.scorer_names:
            stats = config.standardization_stats[name]
            z = np.array([(t.raw[name] - stats.mean) / stats.std for t in stored])
            assert abs(z.mean()) < 1e-9
            assert abs(z.std() - 1.0) < 1e-9
        for triplet in stored:
            assert abs(triplet.ensemble - aggregate_score(triplet.raw, config)) < 1e-9

    def test_rewritten_store_is_sorted(self, store, scorers, prompts, corpus):
        _runner(store, scorers).run(prompts[2:], corpus)
        _runner(store, scorers).run(prompts, corpus)

        pairs = [(t.prompt_id, t.flow_id) for t in store.read_all()]
        assert pairs == sorted(pairs)
        assert len(pairs) == 6


class TestStoredConfig:
    def test_sidecar_wins_over_configured_scorers(self, store, scorers, prompts, corpus, caplog):
        _runner(store, scorers).run(prompts[:2], corpus)
        other = EnsembleConfig(scorer_names=["hps"], weights={"hps": 1.0})
        runner = ScoreMatrixRunner(store, MockExecutorClient(), scorers, other)

        with caplog.at_level(logging.WARNING):
            run = runner.run(prompts, corpus)

        assert run.written == 2
        assert "keeping it" in caplog.text

    def test_preset_statistics_are_kept(self, store, prompts, corpus, two_scorer_config):
        scorers = [SyntheticScorer("a"), SyntheticScorer("b")]
        ScoreMatrixRunner(store, MockExecutorClient(), scorers, two_scorer_config).run(
            prompts, corpus
        )
        assert store.read_config() == two_scorer_config


class TestRunMatrix:
    def test_functional_entry_point(self, store, scorers, prompts, corpus):
        run = run_matrix(
            prompts, corpus, MockExecutorClient(), scorers, EnsembleConfig(), store, workers=2
        )
        assert run.written == 6
        assert run.triplets == store.read_all()

    def test_five_prompts_by_six_flows(self, store, scorers, templates):
        prompts = _numbered_prompts(5)
        corpus = templates[:6]

        run = run_matrix(
            prompts, corpus, MockExecutorClient(), scorers, EnsembleConfig(), store, workers=3
        )

        lines = store.path.read_text(encoding="utf-8").splitlines()
        assert run.written == 30
        assert len(lines) == 30
        assert len(store.completed_pairs()) == 30
        assert len(store.read_scored()) == 30

        again = run_matrix(
            prompts, corpus, MockExecutorClient(), scorers, EnsembleConfig(), store, workers=3
        )
        assert again.written == 0
        assert len(store.path.read_text(encoding="utf-8").splitlines()) == 30
