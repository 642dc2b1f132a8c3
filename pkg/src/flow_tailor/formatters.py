"""Rich formatting utilities for CLI output."""

from __future__ import annotations

from rich.console import Console
from rich.table import Table
from rich.text import Text

from flow_tailor.labeling import LabelStats
from flow_tailor.models import ScoreTable, SelectionResult
from flow_tailor.pipeline import MatrixRun
from flow_tailor.selection import SweepRow


def format_matrix_run(
    run: MatrixRun, histogram: list[tuple[float, float, int]], console: Console
) -> None:
    """Summarize a scoring pass, then show the ensemble score distribution."""
    table = Table(title="Scoring Run", show_header=False)
    table.add_column("Field", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("Pairs", str(run.total_pairs))
    table.add_row("Already scored", str(run.skipped))
    table.add_row("Submitted", str(run.submitted))
    table.add_row("Triplets written", Text(str(run.written), style="green"))
    table.add_row("Failures", Text(str(len(run.failures)), style="red" if run.failures else ""))
    console.print(table)

    for failure in run.failures:
        console.print(f"  [red]{failure.prompt_id}/{failure.flow_id}[/red]: {failure.error}")

    if histogram:
        peak = max(count for _, _, count in histogram) or 1
        dist = Table(title="Ensemble Score Distribution")
        dist.add_column("Range")
        dist.add_column("Count", justify="right")
        dist.add_column("")
        for low, high, count in histogram:
            dist.add_row(f"{low:.3f} - {high:.3f}", str(count), "#" * round(30 * count / peak))
        console.print(dist)


def format_label_stats(stats: LabelStats, console: Console) -> None:
    table = Table(title="Prompt Labels", show_header=False)
    table.add_column("Field", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("Prompts", str(stats.prompts))
    table.add_row("Labeled", str(stats.labeled))
    table.add_row("Discarded", f"{stats.discarded} ({stats.discard_rate:.1%})")
    table.add_row("Labels per prompt", f"{stats.mean_labels:.2f} ± {stats.std_labels:.2f}")
    table.add_row("Max labels", str(stats.max_labels))
    console.print(table)


def format_table_summary(table: ScoreTable, tokens: int, console: Console) -> None:
    kept = len(table.kept_flows())
    discarded = len(table.discarded_flows())
    console.print(
        f"[bold]{len(table.flow_ids)}[/bold] flows x [bold]{len(table.labels)}[/bold] labels; "
        f"kept [green]{kept}[/green], discarded [red]{discarded}[/red]; "
        f"context ~{tokens} tokens"
    )


def format_selection(result: SelectionResult, console: Console) -> None:
    """Selection metadata, meant for a stderr console."""
    lines = [f"[bold]Flow:[/bold] {result.flow_id}", f"[bold]Method:[/bold] {result.method.value}"]
    if result.target_score is not None:
        lines.append(f"[bold]Target score:[/bold] {result.target_score:.3f}")
    if result.neighbor_id is not None:
        lines.append(
            f"[bold]Nearest corpus flow:[/bold] {result.neighbor_id} "
            f"(similarity {result.neighbor_similarity:.4f})"
        )
    if result.explanation:
        lines.append(f"[bold]Explanation:[/bold] {result.explanation}")
    console.print("\n".join(lines))


def format_sweep_table(rows: list[SweepRow], console: Console) -> None:
    table = Table(title="Target Score Sweep")
    table.add_column("Target", justify="right")
    table.add_column("Mean held-out score", justify="right")
    table.add_column("Evaluated", justify="right")
    table.add_column("Failures", justify="right")
    for row in rows:
        mean = "-" if row.mean_score is None else f"{row.mean_score:.4f}"
        table.add_row(f"{row.target:.3f}", mean, str(row.evaluated), str(row.failures))
    console.print(table)
