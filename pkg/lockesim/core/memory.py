"""
Memory endpoint behind the L2: keeps whatever is written back and
acknowledges it. It never starts a transaction.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

from lockesim.core.effects import Effects, TraceRecord
from lockesim.core.protocol import MEMORY_NODE, Message, MessageKind, NO_TOKENS, TokenBundle

logger = logging.getLogger(__name__)


@dataclass
class MemoryBlock:
    tokens: TokenBundle = NO_TOKENS
    data: Optional[int] = None


class MemoryEndpoint:
    node = MEMORY_NODE

    def __init__(self):
        self.blocks: Dict[int, MemoryBlock] = {}

    def receive(self, msg: Message, effects: Effects):
        if not msg.carries_tokens:
            logger.debug("memory ignores %s", msg.descriptor())
            effects.record(TraceRecord(kind=effects.cause, node=self.node, addr=msg.addr, before="MEM",
                                       after="MEM", message=msg.descriptor(), src=msg.src, detail="ignored"))
            return
        block = self.blocks.setdefault(msg.addr, MemoryBlock())
        block.tokens = block.tokens.merge(msg.payload)
        if msg.data is not None:
            block.data = msg.data
        effects.send(Message(MessageKind.ACK, msg.addr, self.node, msg.origin, origin=self.node, ticket=msg.ticket))
        effects.record(TraceRecord(kind=effects.cause, node=self.node, addr=msg.addr, before="MEM",
                                   event=msg.kind.value, actions=("store", "ack"), after="MEM",
                                   message=msg.descriptor(), src=msg.src))

    def clone(self) -> "MemoryEndpoint":
        twin = MemoryEndpoint()
        twin.blocks = {addr: replace(block) for addr, block in self.blocks.items()}
        return twin

    def key(self) -> tuple:
        return tuple(sorted((a, b.tokens.count, b.tokens.owner, b.data) for a, b in self.blocks.items()))
