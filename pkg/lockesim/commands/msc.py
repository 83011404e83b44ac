from rich.console import Console

from lockesim.config import SimConfig
from lockesim.services.system import System, parse_schedule
from lockesim.services.workload import parse_trace
from lockesim.utils.msc import dump_msc

console = Console()


def msc_command(config: SimConfig, trace_text: str, addr: int | None = None,
                schedule_text: str | None = None) -> int:
    """Run the trace and print its message sequence chart"""
    items = parse_trace(trace_text, config.n_l1, config.address_space)
    schedule = parse_schedule(schedule_text) if schedule_text is not None else None
    system = System(config, items)
    report = system.run(schedule)
    console.print(dump_msc(system.log, config.n_l1, addr), markup=False, highlight=False, soft_wrap=True, end="")
    return report.exit_code
