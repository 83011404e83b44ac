"""
Plain-text message sequence chart of a run log: one lifeline per node, one
row per delivered message or completed operation.
"""
from typing import Iterable, List, Optional

from lockesim.config import MSC_COLUMN_WIDTH
from lockesim.core.effects import TraceRecord
from lockesim.core.protocol import L2_NODE, MEMORY_NODE, NodeId, NodeKind, l1_node

STEP_WIDTH = 5


def chart_nodes(n_l1: int) -> List[NodeId]:
    return [l1_node(i) for i in range(n_l1)] + [L2_NODE, MEMORY_NODE]


def _column(node: NodeId, n_l1: int) -> int:
    if node.kind is NodeKind.L1:
        return node.index
    return n_l1 if node.kind is NodeKind.L2 else n_l1 + 1


def _lifelines(columns: int, width: int) -> List[str]:
    line = [" "] * (columns * width)
    for i in range(columns):
        line[i * width + width // 2] = "|"
    return line


def _arrow(columns: int, src: int, dst: int, width: int) -> str:
    line = _lifelines(columns, width)
    a, b = src * width + width // 2, dst * width + width // 2
    if a == b:
        line[a] = "@"
        return "".join(line)
    lo, hi = min(a, b), max(a, b)
    for x in range(lo, hi + 1):
        line[x] = "-"
    line[a] = "o"
    line[b] = ">" if b > a else "<"
    return "".join(line)


def _marker(columns: int, col: int, width: int) -> str:
    line = _lifelines(columns, width)
    line[col * width + width // 2] = "*"
    return "".join(line)


def _annotation(record: TraceRecord) -> str:
    if record.kind == "complete":
        return f"done {record.detail} a={record.addr}"
    kind = record.message.split()[0] if record.message else record.kind
    text = f"{kind} a={record.addr}"
    if record.event:
        text += f" {record.before}→{record.after} {record.event}"
    if record.actions:
        text += " " + " ".join(record.actions)
    if record.kind == "absorb":
        text += " (absorbed)"
    elif record.detail and record.message:
        text += f" ({record.detail})"
    return text


def dump_msc(log: Iterable[TraceRecord], n_l1: int, addr: Optional[int] = None,
             width: int = MSC_COLUMN_WIDTH) -> str:
    nodes = chart_nodes(n_l1)
    columns = len(nodes)
    header = "step".rjust(STEP_WIDTH) + " " + "".join(str(n).center(width) for n in nodes)
    rows = [header.rstrip(), ("-" * STEP_WIDTH + " " + "-" * (columns * width)).rstrip()]
    for record in log:
        if addr is not None and record.addr != addr:
            continue
        if record.kind == "complete":
            chart = _marker(columns, _column(record.node, n_l1), width)
        elif record.message is not None and record.src is not None:
            chart = _arrow(columns, _column(record.src, n_l1), _column(record.node, n_l1), width)
        else:
            continue
        rows.append(f"{record.step:>{STEP_WIDTH}} {chart} {_annotation(record)}")
    return "\n".join(rows) + "\n"
