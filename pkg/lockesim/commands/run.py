from rich.console import Console
from rich.panel import Panel

from lockesim.config import SimConfig
from lockesim.services.artifacts import save_failure
from lockesim.services.system import System, parse_schedule, render_schedule
from lockesim.services.workload import parse_trace, render_trace
from lockesim.utils.formatters import run_table, snapshot_table, verdict_table
from lockesim.utils.msc import dump_msc

console = Console()
err_console = Console(stderr=True)


def run_command(config: SimConfig, trace_text: str, schedule_text: str | None = None,
                plain: bool = False, show_msc: bool = False, msc_addr: int | None = None,
                save: bool = False, artifact_dir=None) -> int:
    """Run one trace and print its report; returns the exit code"""
    items = parse_trace(trace_text, config.n_l1, config.address_space)
    schedule = parse_schedule(schedule_text) if schedule_text is not None else None

    system = System(config, items)
    with console.status("[bold cyan]Simulating...", spinner="dots"):
        report = system.run(schedule)

    if plain:
        console.print(report.render(), markup=False, highlight=False, soft_wrap=True, end="")
    else:
        console.print()
        console.print(run_table(report))
        console.print(verdict_table(report.verdicts))
        if report.memory_image:
            image = "  ".join(f"a={a}:{'-' if v is None else v}" for a, v in report.memory_image.items())
            console.print(f"[bold]Final values:[/bold] {image}")
        if report.note:
            console.print(f"[yellow]![/yellow] {report.note}")

    if show_msc:
        console.print()
        console.print(dump_msc(system.log, config.n_l1, msc_addr), markup=False, highlight=False, soft_wrap=True, end="")

    if report.violation is not None:
        violation = report.violation
        err_console.print(Panel(
            f"[bold red]{violation.verdict.check}[/bold red] failed at step {violation.verdict.step}\n\n"
            f"{violation.verdict.detail}",
            title="Violation", border_style="red",
        ))
        if violation.snapshot is not None:
            err_console.print(snapshot_table(violation.snapshot, violation.verdict.addr))
        err_console.print(violation.render(), markup=False, highlight=False, soft_wrap=True)
    elif not report.ok:
        err_console.print(f"[yellow]![/yellow] {report.ops - report.completed} operation(s) did not complete")

    if save and not report.ok:
        text = report.render() + (report.violation.render() + "\n" if report.violation else "")
        paths = save_failure(f"run-seed-{config.seed}", render_trace(items),
                             render_schedule(system.schedule), text, artifact_dir)
        err_console.print(f"[dim]Replay files written to {paths['schedule'].parent}[/dim]")

    if report.ok:
        console.print("[green]✓[/green] All checks passed")
    return report.exit_code
