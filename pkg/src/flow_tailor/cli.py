"""Typer CLI for flow tailor."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sized
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, NoReturn

import typer
from pydantic import ValidationError
from rich.console import Console

from flow_tailor import __version__
from flow_tailor.exceptions import ConfigError, ExternalServiceError, FlowTailorError

if TYPE_CHECKING:
    from flow_tailor.config import PipelineConfig
    from flow_tailor.graph import WorkflowGraph
    from flow_tailor.models import LabelAssignment, PromptRecord

app = typer.Typer(
    name="flow-tailor",
    help="Prompt-adaptive text-to-image workflow selection.",
)
console = Console()
err_console = Console(stderr=True)


@dataclass
class _Options:
    config: Path | None = None
    seed: int | None = None
    workers: int | None = None


def _exit_code(exc: FlowTailorError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, ExternalServiceError):
        return 3
    return 1


def _fail(exc: Exception) -> NoReturn:
    code = _exit_code(exc) if isinstance(exc, FlowTailorError) else 1
    err_console.print(f"[red]Error: {exc}[/red]")
    raise typer.Exit(code=code) from exc


def _load(ctx: typer.Context) -> PipelineConfig:
    from flow_tailor.config import load_config

    options: _Options = ctx.obj or _Options()
    config = load_config(options.config)
    overrides: dict[str, int] = {}
    if options.seed is not None:
        overrides["seed"] = options.seed
    if options.workers is not None:
        overrides["workers"] = options.workers
    if overrides:
        config = config.model_copy(update=overrides)
    return config


def _corpus(config: PipelineConfig) -> list[tuple[str, WorkflowGraph]]:
    from flow_tailor.store import read_corpus

    return read_corpus(config.resolve(config.paths.corpus))


def _prompts(config: PipelineConfig) -> list[PromptRecord]:
    from flow_tailor.store import read_prompts

    return read_prompts(config.resolve(config.paths.prompts))


def _assignments(config: PipelineConfig) -> list[LabelAssignment]:
    """Stored assignments, labeling the prompt set first if none exist."""
    from flow_tailor.store import assignment_store

    store = assignment_store(config.resolve(config.paths.assignments))
    if store.path.exists():
        return store.read_all()
    assignments, _ = _label_prompts(config)
    return assignments


def _label_prompts(config: PipelineConfig) -> tuple[list[LabelAssignment], list[str]]:
    from flow_tailor.clients import build_labeler
    from flow_tailor.labeling import assign_all
    from flow_tailor.store import assignment_store

    assignments, discarded = assign_all(
        _prompts(config),
        build_labeler(config),
        config.labels,
        max_labels=config.max_labels,
        workers=config.workers,
    )
    assignment_store(config.resolve(config.paths.assignments)).write_all(assignments)
    return assignments, discarded


def _version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"flow-tailor v{__version__}")
        raise typer.Exit()


@app.callback()
def main(
    ctx: typer.Context,
    config: Path | None = typer.Option(
        None,
        "--config",
        "-c",
        help="Config file. Default: $FLOWTAILOR_CONFIG or ./flow_tailor.yaml.",
    ),
    seed: int | None = typer.Option(None, "--seed", help="Override the top-level seed."),
    workers: int | None = typer.Option(None, "--workers", "-w", help="Override worker count."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress to stderr."),
    version: bool | None = typer.Option(
        None,
        "--version",
        "-V",
        help="Show version and exit.",
        callback=_version_callback,
        is_eager=True,
    ),
) -> None:
    """Flow Tailor: pick or predict a generation workflow for each prompt."""
    ctx.obj = _Options(config=config, seed=seed, workers=workers)
    if verbose:
        from rich.logging import RichHandler

        logging.basicConfig(
            level=logging.DEBUG,
            format="%(message)s",
            handlers=[RichHandler(console=err_console, show_path=False)],
            force=True,
        )


@app.command()
def init(
    directory: Path = typer.Argument(Path("."), help="Directory to populate."),
) -> None:
    """Write the default config, bundled templates and prompts into a directory."""
    from importlib.resources import files

    from flow_tailor.config import DEFAULT_CONFIG_NAME

    data = files("flow_tailor") / "data"
    targets = {
        DEFAULT_CONFIG_NAME: data / DEFAULT_CONFIG_NAME,
        "prompts.jsonl": data / "prompts.jsonl",
    }
    for template in sorted((data / "templates").iterdir(), key=lambda t: t.name):
        if template.name.endswith(".json"):
            targets[f"templates/{template.name}"] = template

    directory.mkdir(parents=True, exist_ok=True)
    for relative, source in targets.items():
        path = directory / relative
        if path.exists():
            console.print(f"  [yellow]Exists: {path}[/yellow]")
            continue
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(source.read_bytes())
        console.print(f"  Created {path}")
    console.print("[bold]Initialization complete.[/bold]")


@app.command()
def validate(
    ctx: typer.Context,
    paths: list[Path] | None = typer.Argument(
        None, help="Flow files or directories. Default: the configured template directory."
    ),
) -> None:
    """Parse every flow and report OK or the error with its location."""
    from flow_tailor.exceptions import FlowParseError
    from flow_tailor.graph import parse_flow

    try:
        if not paths:
            config = _load(ctx)
            paths = [config.resolve(config.paths.templates)]
    except FlowTailorError as exc:
        _fail(exc)

    files: list[Path] = []
    for path in paths:
        if path.is_dir():
            files.extend(sorted(path.glob("*.json")))
        else:
            files.append(path)
    if not files:
        err_console.print("[red]Error: no flow files found[/red]")
        raise typer.Exit(code=1)

    failed = 0
    for file in files:
        try:
            graph = parse_flow(file.read_bytes())
        except (FlowParseError, OSError) as exc:
            failed += 1
            console.print(f"[red]FAIL[/red] {file}: {exc}")
            continue
        console.print(f"[green]OK[/green]   {file} ({len(graph.nodes)} nodes)")
    if failed:
        raise typer.Exit(code=1)


@app.command()
def augment(ctx: typer.Context) -> None:
    """Screen templates and expand them into the flow corpus."""
    from flow_tailor.augment import AugmentationPlan, expand_corpus, screen_templates
    from flow_tailor.clients import build_registry
    from flow_tailor.graph import load_flow_dir
    from flow_tailor.store import write_corpus

    try:
        config = _load(ctx)
        settings = config.augment
        templates = load_flow_dir(config.resolve(config.paths.templates))
        if settings.screen:
            screened = screen_templates(
                templates,
                max_json_bytes=settings.max_json_bytes,
                min_block_frequency=settings.min_block_frequency,
            )
            for flow_id, reason in sorted(screened.rejected.items()):
                console.print(f"  [yellow]Screened out {flow_id}: {reason}[/yellow]")
            templates = screened.kept
        plan = AugmentationPlan(
            templates=templates,
            mutations_per_template=settings.mutations_per_template,
            mutation_mix=settings.mutation_mix,
            seed=config.seed,
            dedup=settings.dedup,
            chain_length=settings.chain_length,
        )
        corpus = expand_corpus(plan, build_registry(config))
        out_dir = config.resolve(config.paths.corpus)
        write_corpus(corpus, out_dir)
        console.print(
            f"[green]{len(corpus)} flows from {len(templates)} templates "
            f"written to {out_dir}[/green]"
        )
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def label(ctx: typer.Context) -> None:
    """Assign category labels to the prompt set."""
    from flow_tailor.formatters import format_label_stats
    from flow_tailor.labeling import label_stats

    try:
        config = _load(ctx)
        assignments, discarded = _label_prompts(config)
        format_label_stats(label_stats(assignments, discarded), console)
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def score(ctx: typer.Context) -> None:
    """Generate and score every (prompt, flow) pair missing from the triplet store."""
    from flow_tailor.clients import build_executor, build_scorers
    from flow_tailor.formatters import format_matrix_run
    from flow_tailor.pipeline import ScoreMatrixRunner
    from flow_tailor.scoring import score_histogram
    from flow_tailor.store import TripletStore

    try:
        config = _load(ctx)
        store = TripletStore(config.resolve(config.paths.triplets))
        runner = ScoreMatrixRunner(
            store,
            build_executor(config),
            build_scorers(config),
            config.ensemble,
            seed=config.seed,
            workers=config.workers,
            negative_default=config.selection.negative_default,
        )
        with console.status("Scoring..."):
            run = runner.run(_prompts(config), _corpus(config))
        format_matrix_run(run, score_histogram(store.read_scored()), console)
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def table(ctx: typer.Context) -> None:
    """Build the flows x labels table, apply the median filter, render the context."""
    from flow_tailor.formatters import format_table_summary
    from flow_tailor.store import TripletStore, save_table
    from flow_tailor.table import build_table, estimate_tokens, median_filter, render_context

    try:
        config = _load(ctx)
        triplets = TripletStore(config.resolve(config.paths.triplets)).read_scored()
        filtered = median_filter(build_table(triplets, _assignments(config), config.labels))
        save_table(filtered, config.resolve(config.paths.table))
        context = render_context(filtered, config.selection.context_precision)
        context_path = config.resolve(config.paths.context)
        context_path.parent.mkdir(parents=True, exist_ok=True)
        context_path.write_text(context, encoding="utf-8")
        format_table_summary(filtered, estimate_tokens(context), console)
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def select(
    ctx: typer.Context,
    prompt: str | None = typer.Argument(None, help="Prompt text to select a flow for."),
    method: str | None = typer.Option(None, "--method", "-m", help="ic, ft or fallback."),
    target: float | None = typer.Option(None, "--target", help="Target score for ft."),
    from_file: Path | None = typer.Option(
        None, "--from-file", help="Prompt JSONL; replaces the stored selections."
    ),
    output: Path | None = typer.Option(
        None, "--output", "-o", help="Write the flow JSON here instead of stdout."
    ),
) -> None:
    """Select a flow for a prompt: flow JSON on stdout, metadata on stderr."""
    from flow_tailor.clients import build_keyword_labeler, build_llm
    from flow_tailor.formatters import format_selection
    from flow_tailor.graph import serialize_flow
    from flow_tailor.models import PromptRecord, SelectionResult, TargetScore
    from flow_tailor.selection import (
        select_all,
        select_fallback,
        select_fine_tuned,
        select_in_context,
    )
    from flow_tailor.store import TripletStore, load_table, read_prompts, selection_store
    from flow_tailor.templates import FT_TEMPLATE, PREDICT_BEST_TEMPLATE

    try:
        config = _load(ctx)
        chosen = method or config.selection.method
        if chosen not in ("ic", "ft", "fallback"):
            raise typer.BadParameter(f"Unknown method {chosen!r}; use ic, ft or fallback.")
        if from_file is not None:
            prompts = read_prompts(from_file)
        elif prompt is not None:
            prompts = [PromptRecord(prompt_id="cli", text=prompt)]
        else:
            raise typer.BadParameter("Provide a prompt or --from-file.")

        corpus = _corpus(config)
        negative = config.selection.negative_default

        if chosen == "ft":
            value = target if target is not None else config.selection.target_score
            goal = TargetScore(value=value)
            triplets = TripletStore(config.resolve(config.paths.triplets)).read_scored()
            scores = [t.ensemble for t in triplets if t.ensemble is not None]
            training_range = (min(scores), max(scores)) if scores else None
            template = PREDICT_BEST_TEMPLATE if config.selection.predict_best else FT_TEMPLATE
            llm = build_llm(config, corpus)

            def _one(p: PromptRecord) -> SelectionResult:
                return select_fine_tuned(
                    p,
                    goal,
                    llm,
                    corpus,
                    template,
                    negative_default=negative,
                    training_range=training_range,
                    temperature=config.llm.temperature,
                    max_tokens=config.llm.max_tokens,
                )

        else:
            score_table = load_table(config.resolve(config.paths.table))
            labeler = build_keyword_labeler(config)
            if chosen == "ic":
                context = config.resolve(config.paths.context).read_text(encoding="utf-8")
                llm = build_llm(config, corpus)

                def _one(p: PromptRecord) -> SelectionResult:
                    return select_in_context(
                        p,
                        context,
                        llm,
                        table=score_table,
                        labeler=labeler,
                        corpus=corpus,
                        vocabulary=config.labels,
                        negative_default=negative,
                        temperature=config.llm.temperature,
                    )

            else:

                def _one(p: PromptRecord) -> SelectionResult:
                    return select_fallback(
                        p,
                        score_table,
                        labeler,
                        corpus,
                        vocabulary=config.labels,
                        negative_default=negative,
                    )

        results = select_all(prompts, _one, workers=config.workers)
        store = selection_store(config.resolve(config.paths.selections))
        if from_file is not None:
            store.write_all(results)
            for result in results:
                err_console.print(f"{result.prompt_id} -> {result.flow_id} ({result.method.value})")
            return
        store.append_many(results)
        result = results[0]
        format_selection(result, err_console)
        flow_json = serialize_flow(result.resolved_graph)
        if output is not None:
            output.write_text(flow_json + "\n", encoding="utf-8")
        else:
            typer.echo(flow_json)
    except (FlowTailorError, ValidationError, OSError) as exc:
        _fail(exc)


@app.command(name="export-ft")
def export_ft(
    ctx: typer.Context,
    predict_best: bool = typer.Option(
        False, "--predict-best", help="Only each prompt's top-scoring flow, without scores."
    ),
    output: Path | None = typer.Option(None, "--output", "-o", help="JSONL path."),
) -> None:
    """Export the instruction-tuning dataset for score-conditioned prediction."""
    from flow_tailor.selection import export_ft_dataset, write_ft_dataset
    from flow_tailor.store import TripletStore
    from flow_tailor.templates import FT_TEMPLATE, PREDICT_BEST_TEMPLATE

    try:
        config = _load(ctx)
        triplets = TripletStore(config.resolve(config.paths.triplets)).read_scored()
        template = PREDICT_BEST_TEMPLATE if predict_best else FT_TEMPLATE
        examples = export_ft_dataset(
            triplets, _corpus(config), template, _prompts(config), predict_best=predict_best
        )
        path = output or config.resolve(config.paths.ft_dataset)
        write_ft_dataset(examples, path)
        console.print(f"[green]{len(examples)} examples written to {path}[/green]")
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def analyze(
    ctx: typer.Context,
    which: str = typer.Argument("all", help="tfidf, diversity, originality or all."),
    smooth: bool = typer.Option(False, "--smooth", help="Use ln(1 + N/df) for idf."),
) -> None:
    """Analyze stored selections and write text and JSON reports."""
    from flow_tailor.analysis import (
        AnalysisReport,
        build_label_documents,
        component_frequencies,
        diversity_stats,
        originality_stats,
        render_report,
        report_json,
        tfidf_rank,
    )
    from flow_tailor.clients import build_registry
    from flow_tailor.store import selection_store

    if which not in ("tfidf", "diversity", "originality", "all"):
        err_console.print(f"[red]Error: unknown analysis {which!r}[/red]")
        raise typer.Exit(code=1)
    try:
        config = _load(ctx)
        selections = selection_store(config.resolve(config.paths.selections)).read_all()
        if not selections:
            console.print("[yellow]No stored selections; run `flow-tailor select` first.[/yellow]")
        report = AnalysisReport()
        if which in ("tfidf", "all"):
            registry = build_registry(config)
            documents = build_label_documents(selections, _assignments(config), registry)
            report.tfidf = tfidf_rank(documents, smooth=smooth)
            report.components = component_frequencies(selections, registry)
        if which in ("diversity", "all"):
            report.diversity = diversity_stats(selections)
        if which in ("originality", "all"):
            report.originality = originality_stats(selections, _corpus(config))

        out_dir = config.resolve(config.paths.reports)
        out_dir.mkdir(parents=True, exist_ok=True)
        text = render_report(report)
        (out_dir / f"analysis_{which}.txt").write_text(text, encoding="utf-8")
        json_path = out_dir / f"analysis_{which}.json"
        json_path.write_text(report_json(report) + "\n", encoding="utf-8")
        console.print(text, markup=False, highlight=False)
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def sweep(
    ctx: typer.Context,
    targets: str = typer.Option(
        "", "--targets", help="Comma-separated target scores. Default: from config."
    ),
    predict_best: bool = typer.Option(
        False, "--predict-best", help="Use the score-free predict-best template."
    ),
) -> None:
    """Mean held-out score of generations per target score."""
    import json

    from flow_tailor.clients import build_evaluator, build_executor, build_llm
    from flow_tailor.formatters import format_sweep_table
    from flow_tailor.models import TargetScore
    from flow_tailor.selection import score_sweep
    from flow_tailor.templates import FT_TEMPLATE, PREDICT_BEST_TEMPLATE

    try:
        config = _load(ctx)
    except FlowTailorError as exc:
        _fail(exc)
    try:
        values = (
            [float(v) for v in targets.split(",") if v.strip()]
            if targets
            else config.selection.sweep_targets
        )
        goals = [TargetScore(value=v) for v in values]
    except ValueError as exc:
        err_console.print(f"[red]Error: invalid target list {targets!r}: {exc}[/red]")
        raise typer.Exit(code=1) from exc

    try:
        corpus = _corpus(config)
        rows = score_sweep(
            _prompts(config),
            goals,
            build_llm(config, corpus),
            build_evaluator(config),
            executor=build_executor(config),
            corpus=corpus,
            template=PREDICT_BEST_TEMPLATE if predict_best else FT_TEMPLATE,
            negative_default=config.selection.negative_default,
            seed=config.seed,
        )
        format_sweep_table(rows, console)
        out_dir = config.resolve(config.paths.reports)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.json").write_text(
            json.dumps([r.model_dump() for r in rows], indent=2) + "\n", encoding="utf-8"
        )
    except FlowTailorError as exc:
        _fail(exc)


@app.command()
def status(ctx: typer.Context) -> None:
    """Show resolved configuration and projected pipeline scale."""
    from rich.table import Table

    from flow_tailor.config import find_config_path
    from flow_tailor.store import TripletStore, load_table, read_corpus, read_prompts

    try:
        config = _load(ctx)
    except FlowTailorError as exc:
        _fail(exc)
    options: _Options = ctx.obj or _Options()
    config_path = find_config_path(options.config)

    def _count(loader: Callable[[Path], Sized], path: Path) -> int | None:
        try:
            return len(loader(path))
        except (FlowTailorError, OSError):
            return None

    templates_dir = config.resolve(config.paths.templates)
    n_templates = len(list(templates_dir.glob("*.json"))) if templates_dir.is_dir() else None
    n_prompts = _count(read_prompts, config.resolve(config.paths.prompts))
    n_flows = _count(read_corpus, config.resolve(config.paths.corpus))
    n_triplets = _count(lambda p: TripletStore(p).read_all(), config.resolve(config.paths.triplets))
    try:
        kept_rows: int | None = len(load_table(config.resolve(config.paths.table)).kept_flows())
    except FlowTailorError:
        kept_rows = None
    projected_flows = (
        n_templates * (1 + config.augment.mutations_per_template) if n_templates else None
    )

    def _show(value: int | None) -> str:
        return "-" if value is None else str(value)

    table = Table(title="Flow Tailor Status", show_header=False)
    table.add_column("Field", style="bold")
    table.add_column("Value")
    table.add_row("Version", __version__)
    table.add_row("Config", str(config_path) if config_path else "built-in defaults")
    table.add_row("Base dir", str(config.base_dir))
    table.add_row("Seed / workers", f"{config.seed} / {config.workers}")
    mocks = {
        "executor": config.executor.mock,
        "scorers": config.scorers.mock,
        "llm": config.llm.mock,
        "labeler": config.labeler.mock,
    }
    table.add_row("Clients", ", ".join(f"{k}={'mock' if v else 'live'}" for k, v in mocks.items()))
    table.add_row("Templates", _show(n_templates))
    table.add_row("Corpus flows", _show(n_flows))
    table.add_row("Corpus flows (upper bound)", _show(projected_flows))
    table.add_row("Prompts", _show(n_prompts))
    projected = n_prompts * n_flows if n_prompts is not None and n_flows is not None else None
    table.add_row("Projected triplets", _show(projected))
    table.add_row("Stored triplets", _show(n_triplets))
    table.add_row("Context rows kept", _show(kept_rows))
    console.print(table)
