"""
Trace text format and random workload generation.

    # comment
    <cpu> LD <addr>
    <cpu> ST <addr> <value>
    FENCE               later ops wait for every earlier op
    WB <addr>           L2 writes the block back once earlier ops are done
"""
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

from lockesim.config import FUZZ_BLOCKS, FUZZ_MAX_VALUE, FUZZ_STORE_RATIO
from lockesim.core.errors import TraceError
from lockesim.core.protocol import OpKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceOp:
    cpu: int
    kind: OpKind
    addr: int
    value: Optional[int] = None
    line_no: int = 0

    def __str__(self):
        if self.kind is OpKind.STORE:
            return f"{self.cpu} ST {self.addr} {self.value}"
        return f"{self.cpu} LD {self.addr}"


@dataclass(frozen=True)
class Fence:
    line_no: int = 0

    def __str__(self):
        return "FENCE"


@dataclass(frozen=True)
class WritebackDirective:
    addr: int
    line_no: int = 0

    def __str__(self):
        return f"WB {self.addr}"


TraceItem = Union[TraceOp, Fence, WritebackDirective]


def _int(token: str, what: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise TraceError(f"bad {what} '{token}'", line_no) from None
    if value < 0:
        raise TraceError(f"negative {what}", line_no)
    return value


def parse_trace(text: str, n_l1: int, address_space: Optional[int] = None) -> List[TraceItem]:
    """Parse trace text; per-cpu order is preserved and ops of different cpus race"""
    items: List[TraceItem] = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0].upper()

        if head == "FENCE":
            if len(parts) != 1:
                raise TraceError("FENCE takes no arguments", line_no)
            items.append(Fence(line_no))
            continue
        if head == "WB":
            if len(parts) != 2:
                raise TraceError("expected 'WB <addr>'", line_no)
            addr = _int(parts[1], "address", line_no)
            _check_addr(addr, address_space, line_no)
            items.append(WritebackDirective(addr, line_no))
            continue

        if len(parts) < 3:
            raise TraceError("expected '<cpu> LD <addr>' or '<cpu> ST <addr> <value>'", line_no)
        cpu = _int(parts[0], "cpu", line_no)
        if cpu >= n_l1:
            raise TraceError("cpu out of range", line_no)
        op = parts[1].upper()
        addr = _int(parts[2], "address", line_no)
        _check_addr(addr, address_space, line_no)
        if op == "LD" and len(parts) == 3:
            items.append(TraceOp(cpu, OpKind.LOAD, addr, None, line_no))
        elif op == "ST" and len(parts) == 4:
            items.append(TraceOp(cpu, OpKind.STORE, addr, _int(parts[3], "value", line_no), line_no))
        else:
            raise TraceError(f"malformed operation '{line}'", line_no)
    return items


def _check_addr(addr: int, address_space: Optional[int], line_no: int):
    if address_space is not None and addr >= address_space:
        raise TraceError(f"address {addr} outside 0..{address_space - 1}", line_no)


def load_trace(path, n_l1: int, address_space: Optional[int] = None) -> List[TraceItem]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e
    return parse_trace(text, n_l1, address_space)


def render_trace(items: List[TraceItem]) -> str:
    return "".join(f"{item}\n" for item in items)


def generate_workload(n_ops: int, seed: int, n_l1: int, blocks: int = FUZZ_BLOCKS,
                      max_value: int = FUZZ_MAX_VALUE, store_ratio: float = FUZZ_STORE_RATIO) -> List[TraceOp]:
    """Random loads and stores over `blocks` addresses, spread across the cpus"""
    rng = random.Random(seed)
    ops = []
    for _ in range(n_ops):
        cpu = rng.randrange(n_l1)
        addr = rng.randrange(blocks)
        if rng.random() < store_ratio:
            ops.append(TraceOp(cpu, OpKind.STORE, addr, rng.randint(0, max_value)))
        else:
            ops.append(TraceOp(cpu, OpKind.LOAD, addr))
    logger.debug("generated %d ops for seed %d", n_ops, seed)
    return ops
