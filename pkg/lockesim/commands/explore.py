from rich.console import Console
from rich.panel import Panel

from lockesim.config import SimConfig
from lockesim.services.artifacts import write_text
from lockesim.services.explorer import explore
from lockesim.services.system import render_schedule
from lockesim.services.workload import parse_trace, render_trace

console = Console()


def explore_command(config: SimConfig, trace_text: str, depth: int, max_states: int, out=None) -> int:
    """Exhaustively explore the trace; writes the counterexample schedule to `out` if one is found"""
    items = parse_trace(trace_text, config.n_l1, config.address_space)
    console.print(f"[bold cyan]Exploring[/bold cyan] {len(items)} trace item(s) "
                  f"with {config.n_l1} L1(s), T={config.tokens}, mode={config.mode.value}")

    with console.status("[bold cyan]Exploring...", spinner="dots") as status:
        def progress(visited):
            status.update(f"[bold cyan]Exploring... {visited:,} states")
        report = explore(config, items, depth, max_states, on_progress=progress)

    console.print(report.render(), markup=False, highlight=False, soft_wrap=True, end="")
    if report.truncated:
        console.print("[yellow]![/yellow] Exploration was cut short by the depth or state budget")

    if report.violation is not None:
        console.print(Panel.fit(
            f"[bold red]{report.violation.verdict.check}[/bold red] violated after "
            f"{len(report.counterexample)} step(s)\n"
            "Replay with: [cyan]lockesim run --trace TRACE --schedule SCHEDULE[/cyan]",
            title="Counterexample", border_style="red",
        ))
        if out:
            write_text(out, render_schedule(report.counterexample))
            write_text(f"{out}.trace", render_trace(items))
            console.print(f"[green]✓[/green] Schedule written to {out}")
    return report.exit_code
