from rich.console import Console
from rich.panel import Panel

from lockesim.core.protocol import TableMode
from lockesim.core.tables import dump_tables, validate_tables
from lockesim.utils.formatters import validation_table

console = Console()


def tables_command(dump: bool, validate: bool, mode: TableMode = TableMode.STRICT, which: str = "both") -> int:
    if dump:
        for line in dump_tables(mode, which):
            console.print(line, markup=False, highlight=False, soft_wrap=True)
    if not validate:
        return 0

    report = validate_tables(mode)
    if not dump:
        console.print(validation_table(report))
    status = "[green]complete[/green]" if report.complete else f"[red]{len(report.missing)} cell(s) missing[/red]"
    console.print(Panel.fit(
        f"[bold]L1 cells:[/bold] {report.l1_defined}   [bold]L2 cells:[/bold] {report.l2_defined}   {status}\n"
        f"[bold]Errata delta:[/bold] {len(report.override_cells)} override(s) + "
        f"{len(report.alias_cells)} alias normalization(s)\n"
        f"[bold]Unreachable FreezeGETX cells:[/bold] {len(report.unreachable)}",
        title="Table Validation", border_style="cyan",
    ))
    for cell in report.missing:
        console.print(f"[red]missing[/red] {cell}")
    return 0 if report.complete else 1
