"""Prompt x flow scoring matrix runner."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import UTC, datetime

from pydantic import BaseModel

from flow_tailor.exceptions import PipelineError, ScoringError, StoreError
from flow_tailor.executor.base import ExecutorClient
from flow_tailor.graph import WorkflowGraph
from flow_tailor.models import EnsembleConfig, GenerationJob, PromptRecord, ScoredTriplet
from flow_tailor.scorers.base import ScorerClient
from flow_tailor.scoring import (
    aggregate_score,
    bind_prompt,
    fit_standardization,
    score_image,
    submit_generation,
)
from flow_tailor.store import TripletStore

logger = logging.getLogger(__name__)


class PairFailure(BaseModel):
    prompt_id: str
    flow_id: str
    error: str


class MatrixRun(BaseModel):
    """Summary of one scoring pass."""

    total_pairs: int = 0
    skipped: int = 0
    submitted: int = 0
    written: int = 0
    failures: list[PairFailure] = []
    triplets: list[ScoredTriplet] = []


def _utc_timestamp() -> str:
    return datetime.now(UTC).isoformat(timespec="seconds")


def _pair_key(triplet: ScoredTriplet) -> tuple[str, str]:
    return (triplet.prompt_id, triplet.flow_id)


class ScoreMatrixRunner:
    """Generates and scores every missing (prompt, flow) pair into a TripletStore.

    Jobs run on a bounded thread pool. The calling thread is the only writer:
    each finished pair is appended as soon as its job returns, so an
    interrupted run loses only the jobs still in flight.

    Unless the configured ensemble carries preset statistics, standardization
    is refitted over every stored raw vector when a run ends. The sidecar and
    all stored ensemble scores are then rewritten, in (prompt_id, flow_id)
    order. While the store holds fewer than two vectors its triplets keep
    ``ensemble=None``.
    """

    def __init__(
        self,
        store: TripletStore,
        executor: ExecutorClient,
        scorers: Sequence[ScorerClient],
        ensemble: EnsembleConfig,
        *,
        seed: int = 0,
        workers: int = 4,
        negative_default: str = "",
        clock: Callable[[], str] = _utc_timestamp,
    ) -> None:
        self.store = store
        self.executor = executor
        self.scorers = list(scorers)
        self.ensemble = ensemble
        self.seed = seed
        self.workers = max(1, workers)
        self.negative_default = negative_default
        self.clock = clock

    @property
    def preset_stats(self) -> bool:
        return self.ensemble.standardization_stats is not None

    def _score_pair(
        self, item: tuple[PromptRecord, str, WorkflowGraph]
    ) -> dict[str, float] | PairFailure:
        prompt, flow_id, graph = item
        try:
            resolved = bind_prompt(graph, prompt, self.negative_default)
            job = GenerationJob(
                prompt_id=prompt.prompt_id, flow_id=flow_id, resolved_graph=resolved, seed=self.seed
            )
            handle = submit_generation(job, self.executor)
            return score_image(handle, prompt.text, self.scorers)
        except Exception as exc:
            logger.exception("Pair %s/%s failed", prompt.prompt_id, flow_id)
            return PairFailure(prompt_id=prompt.prompt_id, flow_id=flow_id, error=str(exc))

    def _resolve_config(self, has_records: bool) -> EnsembleConfig:
        stored = self.store.read_config()
        if stored is not None:
            if stored.scorer_names != self.ensemble.scorer_names:
                logger.warning(
                    "Store was scored with %s; keeping it over configured %s",
                    stored.scorer_names,
                    self.ensemble.scorer_names,
                )
            return stored
        if has_records:
            raise StoreError(
                f"{self.store.path} has triplets but no sidecar {self.store.sidecar_path}"
            )
        return self.ensemble

    def _ensemble_of(self, raw: dict[str, float], config: EnsembleConfig) -> float | None:
        if config.standardization_stats is None:
            return None
        return aggregate_score(raw, config)

    def _record(
        self, prompt: PromptRecord, flow_id: str, raw: dict[str, float], config: EnsembleConfig
    ) -> PairFailure | None:
        try:
            ensemble = self._ensemble_of(raw, config)
        except ScoringError as exc:
            logger.error("Pair %s/%s not aggregated: %s", prompt.prompt_id, flow_id, exc)
            return PairFailure(prompt_id=prompt.prompt_id, flow_id=flow_id, error=str(exc))
        if not self.store.sidecar_path.exists():
            self.store.write_config(config)
        self.store.append(
            ScoredTriplet(
                prompt_id=prompt.prompt_id,
                flow_id=flow_id,
                seed=self.seed,
                raw=raw,
                ensemble=ensemble,
                timestamp=self.clock(),
            )
        )
        return None

    def _refit(self, config: EnsembleConfig) -> list[ScoredTriplet]:
        stored = self.store.read_all()
        if not self.preset_stats:
            try:
                stats = fit_standardization([t.raw for t in stored], config.scorer_names)
            except ScoringError as exc:
                logger.warning("Ensemble scores deferred: %s", exc)
            else:
                config = config.model_copy(update={"standardization_stats": stats})
                logger.info("Fitted standardization over %d score vectors", len(stored))
        rescored = sorted(
            (t.model_copy(update={"ensemble": self._ensemble_of(t.raw, config)}) for t in stored),
            key=_pair_key,
        )
        self.store.write_config(config)
        self.store.write_all(rescored)
        return rescored

    def run(
        self,
        prompts: Sequence[PromptRecord],
        corpus: Sequence[tuple[str, WorkflowGraph]],
    ) -> MatrixRun:
        """Score every pair not already in the store.

        Raises:
            PipelineError: If prompts or corpus is empty.
            StoreError: If the store is corrupt.
        """
        if not prompts or not corpus:
            raise PipelineError("run_matrix needs at least one prompt and one flow")

        existing = self.store.read_all()
        done = {_pair_key(t) for t in existing}
        pairs = [
            (prompt, flow_id, graph)
            for prompt in sorted(prompts, key=lambda p: p.prompt_id)
            for flow_id, graph in sorted(corpus, key=lambda item: item[0])
        ]
        pending = [p for p in pairs if (p[0].prompt_id, p[1]) not in done]
        run = MatrixRun(total_pairs=len(pairs), skipped=len(pairs) - len(pending))
        logger.info("Submitting %d jobs (%d already scored)", len(pending), run.skipped)
        if not pending:
            return run

        config = self._resolve_config(bool(existing))
        written: set[tuple[str, str]] = set()
        pool = ThreadPoolExecutor(max_workers=self.workers)
        try:
            futures = {pool.submit(self._score_pair, item): item for item in pending}
            run.submitted = len(futures)
            for future in as_completed(futures):
                prompt, flow_id, _ = futures[future]
                outcome = future.result()
                if not isinstance(outcome, PairFailure):
                    outcome = self._record(prompt, flow_id, outcome, config)
                    if outcome is None:
                        written.add((prompt.prompt_id, flow_id))
                if outcome is not None:
                    run.failures.append(outcome)
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

        run.failures.sort(key=lambda f: (f.prompt_id, f.flow_id))
        if not written:
            logger.warning("No pair completed; nothing written")
            return run

        run.triplets = [t for t in self._refit(config) if _pair_key(t) in written]
        run.written = len(run.triplets)
        logger.info("Wrote %d triplets, %d failures", run.written, len(run.failures))
        return run


def run_matrix(
    prompts: Sequence[PromptRecord],
    corpus: Sequence[tuple[str, WorkflowGraph]],
    executor: ExecutorClient,
    scorers: Sequence[ScorerClient],
    config: EnsembleConfig,
    store: TripletStore,
    **options: object,
) -> MatrixRun:
    """Functional entry point over :class:`ScoreMatrixRunner`."""
    runner = ScoreMatrixRunner(
        store, executor, scorers, config, **options  # type: ignore[arg-type]
    )
    return runner.run(prompts, corpus)
