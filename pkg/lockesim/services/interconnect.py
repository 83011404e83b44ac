"""
Unordered interconnect. Messages wait in an in-flight pool and leave it one
per step in an order chosen by the delivery policy; nothing is lost,
duplicated or altered on the way.

With `fold` set, a request, retry or completion notice identical to one
already in flight joins it instead of queueing a second copy. That bounds
retry storms in long runs and keeps the explorer's state graph finite.
"""
import copy
import logging
import random
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from lockesim.core.errors import ProtocolFault, ScheduleError
from lockesim.core.protocol import Message, MessageKind, NodeId, PAYLOAD_KINDS

logger = logging.getLogger(__name__)


class DeliveryPolicy(Enum):
    FIFO = "fifo"
    RANDOM_ORDER = "random"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class TokenTotals:
    count: int = 0
    owners: int = 0

    @property
    def owner(self) -> bool:
        return self.owners > 0

    def __str__(self):
        return f"{{{self.count},o×{self.owners}}}"


@dataclass(frozen=True)
class DelayedSend:
    release_at: int
    message: Message
    dests: Tuple[NodeId, ...]


class NetworkState:
    def __init__(self, policy: DeliveryPolicy = DeliveryPolicy.RANDOM_ORDER, seed: int = 0, fold: bool = False):
        self.policy = policy
        self.fold = fold
        self.rng = random.Random(seed)
        self.in_flight: Dict[int, Message] = {}
        self.delayed: List[DelayedSend] = []
        self.next_seq = 1
        self.sent = 0
        self.delivered = 0
        self.sent_by_kind: Counter = Counter()
        self.folded = 0

    def __len__(self):
        return len(self.in_flight)

    def clone(self) -> "NetworkState":
        twin = copy.copy(self)
        twin.in_flight = dict(self.in_flight)
        twin.delayed = list(self.delayed)
        twin.sent_by_kind = Counter(self.sent_by_kind)
        if self.policy is not DeliveryPolicy.ADVERSARIAL:
            twin.rng = random.Random()
            twin.rng.setstate(self.rng.getstate())
        return twin

    @property
    def quiescent(self) -> bool:
        return not self.in_flight and not self.delayed

    # ==================== SENDING ====================

    def send(self, msg: Message) -> Message:
        if self.fold and msg.kind not in PAYLOAD_KINDS and msg.kind is not MessageKind.ACK:
            twin = self.find(msg.descriptor())
            if twin is not None:
                self.folded += 1
                return self.in_flight[twin]
        msg = replace(msg, seq=self.next_seq)
        self.next_seq += 1
        self.in_flight[msg.seq] = msg
        self.sent += 1
        self.sent_by_kind[msg.kind] += 1
        return msg

    def broadcast(self, msg: Message, dests: Iterable[NodeId]) -> List[Message]:
        """One copy per destination; token-carrying messages cannot be copied"""
        if msg.carries_tokens:
            raise ProtocolFault(f"broadcast of a token-carrying message: {msg.descriptor()}")
        return [self.send(replace(msg, dest=dest)) for dest in dests]

    def send_later(self, msg: Message, dests: Iterable[NodeId], release_at: int):
        if msg.carries_tokens:
            raise ProtocolFault(f"delayed broadcast of a token-carrying message: {msg.descriptor()}")
        self.delayed.append(DelayedSend(release_at, msg, tuple(dests)))

    def release_due(self, now: int) -> int:
        due = [d for d in self.delayed if d.release_at <= now]
        self.delayed = [d for d in self.delayed if d.release_at > now]
        for d in due:
            self.broadcast(d.message, d.dests)
        return len(due)

    def release_all(self) -> int:
        due = self.delayed
        self.delayed = []
        for d in due:
            self.broadcast(d.message, d.dests)
        return len(due)

    # ==================== DELIVERY ====================

    def descriptors(self) -> List[str]:
        """Distinct descriptors of in-flight messages, oldest first"""
        seen = []
        for seq in sorted(self.in_flight):
            text = self.in_flight[seq].descriptor()
            if text not in seen:
                seen.append(text)
        return seen

    def find(self, descriptor: str) -> Optional[int]:
        for seq in sorted(self.in_flight):
            if self.in_flight[seq].descriptor() == descriptor:
                return seq
        return None

    def take(self, seq: int) -> Message:
        msg = self.in_flight.pop(seq)
        self.delivered += 1
        return msg

    def pick(self, descriptor: str) -> Message:
        """Remove the oldest message matching `descriptor`; a delayed send it names is released early"""
        seq = self.find(descriptor)
        if seq is None:
            for d in self.delayed:
                if any(replace(d.message, dest=dest).descriptor() == descriptor for dest in d.dests):
                    self.release_all()
                    seq = self.find(descriptor)
                    break
        if seq is None:
            raise ScheduleError(f"scheduled message is not in flight: {descriptor}")
        return self.take(seq)

    def step(self, descriptor: Optional[str] = None) -> Optional[Message]:
        """Remove and return the next message to deliver, or None when nothing is in flight"""
        if self.policy is DeliveryPolicy.ADVERSARIAL:
            if descriptor is None:
                raise ScheduleError("adversarial delivery needs a scripted message")
            return self.pick(descriptor)
        if not self.in_flight:
            return None
        order = sorted(self.in_flight)
        if self.policy is DeliveryPolicy.FIFO:
            return self.take(order[0])
        return self.take(order[self.rng.randrange(len(order))])

    # ==================== INTROSPECTION ====================

    def messages(self, addr: Optional[int] = None) -> List[Message]:
        return [self.in_flight[s] for s in sorted(self.in_flight)
                if addr is None or self.in_flight[s].addr == addr]

    def in_flight_bundle(self, addr: int) -> TokenTotals:
        count = owners = 0
        for msg in self.in_flight.values():
            if msg.addr == addr and msg.payload is not None:
                count += msg.payload.count
                owners += int(msg.payload.owner)
        return TokenTotals(count, owners)

    def key(self) -> tuple:
        """In-flight and delayed traffic as multisets, without sequence numbers"""
        flying = tuple(sorted(m.descriptor() for m in self.in_flight.values()))
        later = tuple(sorted((d.message.descriptor(), tuple(str(x) for x in d.dests)) for d in self.delayed))
        return flying, later

    def count(self, kind: MessageKind) -> int:
        return self.sent_by_kind[kind]
