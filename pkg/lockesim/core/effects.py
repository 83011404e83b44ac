"""
What a controller hands back to the event loop after handling a stimulus:
outgoing messages, completed processor operations and trace records.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from lockesim.core.protocol import Message, NodeId, OpKind, Priority


@dataclass(frozen=True)
class ProcessorOp:
    """A demand load or store from the processor attached to an L1"""
    cpu: int
    kind: OpKind
    addr: int
    value: Optional[int] = None
    priority: Optional[Priority] = None

    def __str__(self):
        text = f"{self.kind.value} a={self.addr}"
        if self.kind is OpKind.STORE:
            text += f" v={self.value}"
        return text


@dataclass(frozen=True)
class WritebackRequest:
    """Harness directive that makes the L2 replace a block"""
    addr: int

    def __str__(self):
        return f"WB a={self.addr}"


@dataclass(frozen=True)
class Outgoing:
    message: Message
    dests: Optional[Tuple[NodeId, ...]] = None    # None: unicast to message.dest
    delayed: bool = False


@dataclass(frozen=True)
class Completion:
    cpu: int
    kind: OpKind
    addr: int
    value: int


@dataclass(frozen=True)
class TraceRecord:
    """One controller reaction, as it appears in the run log and the chart"""
    kind: str                     # deliver, issue, replay, reissue, writeback, stall, complete, absorb
    node: NodeId
    addr: int
    before: str = ""
    event: str = ""
    actions: Tuple[str, ...] = ()
    after: str = ""
    message: Optional[str] = None
    src: Optional[NodeId] = None
    detail: str = ""
    step: int = 0

    def __str__(self):
        head = f"[{self.step}] {self.kind:<9} {self.node} a={self.addr}"
        if self.event:
            head += f" {self.before}→{self.after} {self.event}"
        if self.actions:
            head += " " + " ".join(self.actions)
        if self.message:
            head += f" <{self.message}>"
        if self.detail:
            head += f" {self.detail}"
        return head


@dataclass
class Effects:
    cause: str = "deliver"
    outbox: List[Outgoing] = field(default_factory=list)
    completions: List[Completion] = field(default_factory=list)
    records: List[TraceRecord] = field(default_factory=list)

    def send(self, message: Message):
        self.outbox.append(Outgoing(message))

    def broadcast(self, message: Message, dests, delayed: bool = False):
        self.outbox.append(Outgoing(message, tuple(dests), delayed))

    def record(self, record: TraceRecord):
        self.records.append(record)

    @property
    def messages(self) -> List[Message]:
        """Unicast messages, in emission order (broadcasts not expanded)"""
        return [o.message for o in self.outbox if o.dests is None]
