import time

from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from lockesim.config import FUZZ_BLOCKS, SimConfig
from lockesim.services.fuzzer import export_csv, fuzz
from lockesim.utils.formatters import format_time, fuzz_table

console = Console()


def fuzz_command(config: SimConfig, n_ops: int, n_seeds: int, first_seed: int = 0,
                 workers: int | None = None, blocks: int = FUZZ_BLOCKS, csv_path=None, artifact_dir=None) -> int:
    """Run `n_seeds` random workloads and summarize them"""
    seeds = list(range(first_seed, first_seed + n_seeds))
    start = time.perf_counter()
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(f"[cyan]Fuzzing {n_ops} ops per seed...", total=len(seeds))

        def advance(row):
            if not row["ok"]:
                progress.console.print(f"[bold red]seed {row['seed']} failed:[/bold red] {row['check']}")
            progress.advance(task)

        summary = fuzz(config, n_ops, seeds, workers, blocks, artifact_dir, on_result=advance)
    elapsed = time.perf_counter() - start

    if not summary.results.empty:
        console.print(fuzz_table(summary.results))
    console.print(summary.render(), markup=False, highlight=False, soft_wrap=True, end="")
    console.print(f"[dim]Finished in {format_time(elapsed)}[/dim]")
    if csv_path:
        export_csv(summary, csv_path)
        console.print(f"[green]✓[/green] Results written to {csv_path}")
    for row in summary.failures.itertuples():
        console.print(f"[yellow]Replay:[/yellow] {row.artifact}")
    return summary.exit_code
