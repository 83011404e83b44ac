from importlib.resources import files

from lockesim.core.tables import parse_dump_line

GOLDEN_DUMPS = {"L1": "l1_strict.txt", "L2": "l2_strict.txt"}


def read_resource(filename: str) -> str:
    return files("lockesim.data").joinpath(filename).read_text()


def load_golden_dump(table: str) -> list[str]:
    """Cell lines of the packaged STRICT dump for `table` ("L1" or "L2"), header skipped"""
    text = read_resource(GOLDEN_DUMPS[table.upper()])
    return [line for line in text.splitlines() if line.strip() and not line.startswith("#")]


def load_golden_cells(table: str) -> list[tuple]:
    """(table, state, event, cell) per golden line"""
    return [parse_dump_line(line) for line in load_golden_dump(table)]


def default_config_text() -> str:
    return read_resource("default.cfg")


def sample_trace(name: str) -> str:
    return read_resource(f"{name}.trace")
