from rich.table import Table

from lockesim.core.tables import ValidationReport


def format_verdict(passed: bool) -> str:
    return "[bold green]PASS[/bold green]" if passed else "[bold red]FAIL[/bold red]"


def format_state(state: str) -> str:
    """Stable states plain, transient states yellow, control/frozen states magenta"""
    if state in ("I", "S", "O", "E", "M", "A", "MEM"):
        return f"[cyan]{state}[/cyan]"
    if state in ("IS", "IM", "SM"):
        return f"[yellow]{state}[/yellow]"
    return f"[magenta]{state}[/magenta]"


def format_count(value: int) -> str:
    if value == 0:
        return "[dim]0[/dim]"
    return f"{value:,}"


def format_time(seconds):
    """Format execution time in a human-readable way"""
    if seconds < 1:
        return f"{seconds*1000:.0f}ms"
    elif seconds < 60:
        return f"{seconds:.2f}s"
    else:
        minutes = int(seconds // 60)
        secs = seconds % 60
        return f"{minutes}m {secs:.1f}s"


def run_table(report) -> Table:
    table = Table(title="Run Report", show_header=True, header_style="bold magenta")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("Mode / policy / seed", f"{report.mode} / {report.policy} / {report.seed}")
    table.add_row("Steps", format_count(report.steps))
    table.add_row("Completed", f"{report.completed}/{report.ops}")
    for kind, count in report.messages.items():
        table.add_row(f"  {kind}", format_count(count))
    table.add_row("Retries", format_count(report.retries))
    table.add_row("Freezes", format_count(report.freezes))
    table.add_row("Reissues", format_count(report.reissues))
    return table


def verdict_table(verdicts) -> Table:
    table = Table(title="Checks", show_header=True, header_style="bold magenta")
    table.add_column("Check", style="cyan")
    table.add_column("Verdict", justify="center")
    table.add_column("Detail", style="dim")
    for v in verdicts:
        detail = v.detail.splitlines()[0] if v.detail else ""
        table.add_row(v.check, format_verdict(v.passed), detail)
    return table


def snapshot_table(snapshot, addr=None) -> Table:
    table = Table(title=f"State at step {snapshot.step}", show_header=True, header_style="bold magenta")
    table.add_column("Addr", justify="right")
    table.add_column("Node", style="cyan")
    table.add_column("State", justify="center")
    table.add_column("Tokens", justify="right")
    table.add_column("Value", justify="right")
    table.add_column("Acks", justify="right")
    for v in sorted(snapshot.lines, key=lambda v: (v.addr, v.node)):
        if addr is not None and v.addr != addr:
            continue
        table.add_row(str(v.addr), str(v.node), format_state(v.state), str(v.tokens),
                      "-" if v.data is None else str(v.data), str(v.pending_acks))
    return table


def validation_table(report: ValidationReport) -> Table:
    table = Table(title="STRICT → ERRATA differences", show_header=True, header_style="bold magenta",
                  show_lines=True)
    table.add_column("#", justify="right", style="dim")
    table.add_column("Cell", style="cyan", no_wrap=True)
    table.add_column("Strict")
    table.add_column("Errata", style="green")
    table.add_column("Reason", style="dim")
    for idx, diff in enumerate(report.errata_diff, 1):
        table.add_row(str(idx), f"{diff.table} ({diff.state.value}, {diff.event.value})",
                      diff.strict.render(), diff.errata.render(), diff.reason)
    return table


def fuzz_table(df) -> Table:
    table = Table(title="Fuzz Results", show_header=True, header_style="bold magenta")
    table.add_column("Seed", justify="right", style="cyan")
    table.add_column("Result", justify="center")
    table.add_column("Ops", justify="right")
    table.add_column("Steps", justify="right")
    table.add_column("Msgs", justify="right")
    table.add_column("Retries", justify="right")
    table.add_column("Freezes", justify="right")
    table.add_column("Failure", style="red")
    for row in df.itertuples():
        table.add_row(str(row.seed), format_verdict(bool(row.ok)), f"{row.completed}/{row.ops}",
                      format_count(int(row.steps)), format_count(int(row.messages)),
                      format_count(int(row.retries)), format_count(int(row.freezes)), row.check or "")
    return table
