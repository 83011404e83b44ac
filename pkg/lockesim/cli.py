import logging
import sys
from pathlib import Path

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel

from lockesim.commands import explore_command, fuzz_command, msc_command, run_command, tables_command
from lockesim.config import (
    APP_NAME, EXPLORE_DEPTH, EXPLORE_MAX_STATES, EXPLORE_N_L1, EXPLORE_TOKENS, FUZZ_BLOCKS,
    FUZZ_OPS, FUZZ_SEEDS, LOG_FILE, LOG_LEVEL, LOG_TO_FILE, VERSION, load_config,
)
from lockesim.core.errors import LockeError
from lockesim.core.protocol import TableMode
from lockesim.data.load_data import sample_trace

console = Console()
err_console = Console(stderr=True)

app = typer.Typer(
    name=APP_NAME,
    help="Token-coherence protocol simulator and verification harness",
    add_completion=False,
)


def setup_logging(level: str = LOG_LEVEL):
    handlers = [RichHandler(console=err_console, show_path=False, rich_tracebacks=True)]
    if LOG_TO_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]",
                        handlers=handlers, force=True)


def _mode(value: str | None) -> TableMode | None:
    if value is None:
        return None
    try:
        return TableMode(value.lower())
    except ValueError:
        raise typer.BadParameter(f"'{value}' is not one of strict, errata") from None


def _read(path: Path | None) -> str | None:
    if path is None:
        return None
    try:
        return path.read_text()
    except OSError as e:
        raise typer.BadParameter(f"cannot read {path}: {e}") from None


def _finish(action):
    """Run a command body and turn its result or error into an exit code"""
    try:
        code = action()
    except LockeError as e:
        err_console.print(f"[bold red]Error:[/bold red] {e}")
        raise typer.Exit(2)
    raise typer.Exit(code)


@app.command()
def version():
    """
    ℹ️ Show lockesim version information
    """
    console.print(Panel.fit(
        f"[bold cyan]{APP_NAME}[/bold cyan] version [green]{VERSION}[/green]\n\n"
        f"[dim]Table-driven token-coherence simulator with invariant checking[/dim]\n\n"
        f"[yellow]Python:[/yellow] {sys.version.split()[0]}",
        title="ℹ️ Version Info",
        border_style="cyan"
    ))


@app.command(name="help")
def show_help(
    command: str = typer.Argument(None, help="Command to get help for")
):
    """
    📖 Show detailed help for commands
    """
    if command is None:
        console.print(f"""
[bold cyan]{APP_NAME} {VERSION}[/bold cyan]

[bold cyan]🎯 QUICK START:[/bold cyan]

  [green]lockesim run --trace race.trace[/green]        Simulate a trace and check every step
  [green]lockesim explore[/green]                       Explore every interleaving of a small trace
  [green]lockesim fuzz --ops 1000 --seeds 5[/green]     Random workloads across seeds
  [green]lockesim tables --validate[/green]             Check the state tables and their errata

[bold cyan]📄 TRACE FORMAT:[/bold cyan]

  0 ST 4 7        cpu 0 stores 7 to block 4
  1 LD 4          cpu 1 loads block 4
  FENCE           later operations wait for all earlier ones
  WB 4            the L2 writes block 4 back to memory

[bold cyan]🚦 EXIT CODES:[/bold cyan]

  0 all checks passed and every operation completed
  1 a check failed or an operation never completed
  2 bad usage, configuration, trace or schedule

[dim]Use [cyan]lockesim help COMMAND[/cyan] for details on one command[/dim]
        """)
    elif command == "run":
        console.print("""
[bold cyan]▶️ RUN[/bold cyan]

Simulates a trace and checks conservation, exclusivity, value coherence and
the per-line state invariants after every step, then the load/store history.

[yellow]Options:[/yellow]
  --trace, -t       Trace file (required)
  --config, -c      key=value config file
  --schedule        Replay a schedule (e.g. an explorer counterexample)
  --policy          fifo | random | adversarial
  --mode, -m        strict | errata
  --msc             Print the message sequence chart after the report
  --plain           Print the plain-text report only
        """)
    elif command == "explore":
        console.print("""
[bold cyan]🔎 EXPLORE[/bold cyan]

Breadth-first search over every delivery order of a small trace. Reports the
visited states, stuck states and the shortest counterexample if any check fails.

[yellow]Options:[/yellow]
  --trace, -t       Trace file (default: packaged two-cpu race)
  --depth, -d       Maximum schedule length
  --max-states      Maximum states to visit
  --out, -o         Write the counterexample schedule here
        """)
    elif command == "fuzz":
        console.print("""
[bold cyan]🎲 FUZZ[/bold cyan]

Random loads and stores over a few blocks, one run per seed. Failing seeds
leave their trace, schedule and report in the artifact directory.

[yellow]Options:[/yellow]
  --ops, -n         Operations per seed
  --seeds, -s       Number of seeds
  --workers, -w     Parallel workers
  --csv             Export per-seed results
        """)
    else:
        console.print(f"[yellow]No detailed help available for '{command}'[/yellow]\n")
        console.print("Available commands: run, explore, fuzz, tables, msc, version, help")


@app.command()
def run(
    trace: Path = typer.Option(..., "--trace", "-t", help="Trace file"),
    config: Path = typer.Option(None, "--config", "-c", help="key=value config file"),
    schedule: Path = typer.Option(None, "--schedule", help="Schedule to replay"),
    seed: int = typer.Option(None, "--seed", help="Delivery seed"),
    policy: str = typer.Option(None, "--policy", "-p", help="fifo | random | adversarial"),
    mode: str = typer.Option(None, "--mode", "-m", help="strict | errata"),
    n_l1: int = typer.Option(None, "--n-l1", help="Number of L1 caches"),
    tokens: int = typer.Option(None, "--tokens", help="Tokens per block"),
    plain: bool = typer.Option(False, "--plain", help="Plain-text report"),
    msc: bool = typer.Option(False, "--msc", help="Print the message sequence chart"),
    addr: int = typer.Option(None, "--addr", help="Restrict the chart to one block"),
    save: bool = typer.Option(False, "--save", help="Write replay files when the run fails"),
):
    """
    ▶️ Simulate a trace with every check enabled
    """
    trace_text = _read(trace)
    schedule_text = _read(schedule)
    _finish(lambda: run_command(
        load_config(config, seed=seed, policy=policy, mode=_mode(mode), n_l1=n_l1, tokens=tokens),
        trace_text, schedule_text, plain, msc, addr, save,
    ))


@app.command()
def fuzz(
    ops: int = typer.Option(FUZZ_OPS, "--ops", "-n", help="Operations per seed"),
    seeds: int = typer.Option(FUZZ_SEEDS, "--seeds", "-s", help="Number of seeds"),
    first_seed: int = typer.Option(0, "--first-seed", help="First seed"),
    workers: int = typer.Option(None, "--workers", "-w", help="Parallel workers"),
    blocks: int = typer.Option(FUZZ_BLOCKS, "--blocks", help="Distinct blocks touched"),
    config: Path = typer.Option(None, "--config", "-c", help="key=value config file"),
    mode: str = typer.Option(None, "--mode", "-m", help="strict | errata"),
    n_l1: int = typer.Option(None, "--n-l1", help="Number of L1 caches"),
    csv: Path = typer.Option(None, "--csv", help="Export per-seed results as CSV"),
    artifacts: Path = typer.Option(None, "--artifacts", help="Directory for failure replay files"),
):
    """
    🎲 Run seeded random workloads
    """
    _finish(lambda: fuzz_command(
        load_config(config, mode=_mode(mode), n_l1=n_l1),
        ops, seeds, first_seed, workers, blocks, csv, artifacts,
    ))


@app.command()
def explore(
    trace: Path = typer.Option(None, "--trace", "-t", help="Trace file (default: packaged race)"),
    depth: int = typer.Option(EXPLORE_DEPTH, "--depth", "-d", help="Maximum schedule length"),
    max_states: int = typer.Option(EXPLORE_MAX_STATES, "--max-states", help="Maximum states to visit"),
    mode: str = typer.Option(None, "--mode", "-m", help="strict | errata"),
    n_l1: int = typer.Option(EXPLORE_N_L1, "--n-l1", help="Number of L1 caches"),
    tokens: int = typer.Option(EXPLORE_TOKENS, "--tokens", help="Tokens per block"),
    config: Path = typer.Option(None, "--config", "-c", help="key=value config file"),
    out: Path = typer.Option(None, "--out", "-o", help="Write the counterexample schedule here"),
):
    """
    🔎 Explore every interleaving of a small trace
    """
    trace_text = _read(trace) if trace else sample_trace("explore")
    _finish(lambda: explore_command(
        load_config(config, mode=_mode(mode), n_l1=n_l1, tokens=tokens),
        trace_text, depth, max_states, out,
    ))


@app.command()
def tables(
    dump: bool = typer.Option(False, "--dump", help="Print one line per cell"),
    validate: bool = typer.Option(False, "--validate", help="Check completeness and the errata delta"),
    mode: str = typer.Option("strict", "--mode", "-m", help="strict | errata"),
    which: str = typer.Option("both", "--which", help="L1 | L2 | both"),
):
    """
    📋 Dump or validate the controller tables
    """
    if not dump and not validate:
        raise typer.BadParameter("give --dump and/or --validate")
    if which not in ("L1", "L2", "both"):
        raise typer.BadParameter(f"'{which}' is not one of L1, L2, both")
    _finish(lambda: tables_command(dump, validate, _mode(mode), which))


@app.command()
def msc(
    trace: Path = typer.Option(..., "--trace", "-t", help="Trace file"),
    addr: int = typer.Option(None, "--addr", help="Only this block"),
    schedule: Path = typer.Option(None, "--schedule", help="Schedule to replay"),
    config: Path = typer.Option(None, "--config", "-c", help="key=value config file"),
    seed: int = typer.Option(None, "--seed", help="Delivery seed"),
    policy: str = typer.Option(None, "--policy", "-p", help="fifo | random | adversarial"),
    mode: str = typer.Option(None, "--mode", "-m", help="strict | errata"),
    n_l1: int = typer.Option(None, "--n-l1", help="Number of L1 caches"),
):
    """
    🧭 Print the message sequence chart of a run
    """
    trace_text = _read(trace)
    schedule_text = _read(schedule)
    _finish(lambda: msc_command(
        load_config(config, seed=seed, policy=policy, mode=_mode(mode), n_l1=n_l1),
        trace_text, addr, schedule_text,
    ))


@app.callback(invoke_without_command=True)
def root(
    ctx: typer.Context,
    version_flag: bool = typer.Option(None, "--version", "-v", help="Show version"),
    log_level: str = typer.Option(LOG_LEVEL, "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
):
    """
    lockesim - token-coherence simulator, explorer and fuzzer
    """
    setup_logging(log_level)
    if version_flag:
        console.print(f"{APP_NAME} version {VERSION}")
        raise typer.Exit()

    if ctx.invoked_subcommand is None:
        console.print(f"""
[bold cyan]{APP_NAME} {VERSION}[/bold cyan]

  [green]lockesim run --trace FILE[/green]     Simulate a trace
  [green]lockesim explore[/green]              Exhaustive exploration
  [green]lockesim fuzz[/green]                 Seeded random workloads
  [green]lockesim tables --validate[/green]    Check the state tables
  [green]lockesim help[/green]                 Show detailed help
        """)


def main():
    """Entry point for the CLI"""
    app()


if __name__ == "__main__":
    main()
