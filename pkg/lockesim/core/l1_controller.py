"""
L1 cache controller: classifies processor operations and network messages
into table events, runs the L1 table and implements its actions.
"""
import copy
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from lockesim.core.controller import CacheLine, Controller, Firing
from lockesim.core.effects import Completion, Effects, ProcessorOp, TraceRecord
from lockesim.core.errors import ProtocolFault
from lockesim.core.protocol import (
    ActionKind, EventKind, L1State, L2_NODE, Message, MessageKind, NodeId,
    NO_TOKENS, OpKind, Priority, RetryKind, TableMode, l1_node,
)
from lockesim.core.tables import l1_table_lookup

logger = logging.getLogger(__name__)

OP_EVENTS = {OpKind.LOAD: EventKind.LOAD, OpKind.STORE: EventKind.STORE}

# states in which a pending operation finishes through its own table cell
LOAD_READY = frozenset({L1State.S, L1State.O, L1State.E, L1State.M})
STORE_READY = frozenset({L1State.E, L1State.M})

REISSUABLE = frozenset({L1State.IS, L1State.IM, L1State.SM, L1State.S, L1State.O, L1State.I, L1State.F})

PAYLOAD_EVENTS = {
    MessageKind.DATA_SHARED: EventKind.DATA_SHARED,
    MessageKind.TOKENS: EventKind.DATA_SHARED,
    MessageKind.DATA_OWNER: EventKind.DATA_OWNER,
    MessageKind.DATA_ALL_TOKENS: EventKind.DATA_ALL_TOKENS,
}
PLAIN_EVENTS = {
    MessageKind.GETS: EventKind.GETS,
    MessageKind.SPECIAL_GETS: EventKind.SPECIAL_GETS,
    MessageKind.SPECIAL_GETX: EventKind.SPECIAL_GETX,
    MessageKind.ACK: EventKind.ACK,
    MessageKind.RETRY: EventKind.RETRY,
    MessageKind.COMPLETE: EventKind.COMPLETE,
}


def _op_key(op: Optional[ProcessorOp]):
    if op is None:
        return None
    return (op.cpu, op.kind.value, op.addr, op.value, op.priority.birth, op.priority.node)


@dataclass
class L1Line(CacheLine):
    state: L1State = L1State.I
    boss: Optional[NodeId] = None
    boss_priority: Optional[Priority] = None
    pending_op: Optional[ProcessorOp] = None
    issued: bool = False              # a GETS/GETX went out for pending_op

    @property
    def pending_store(self) -> bool:
        return self.issued and self.pending_op is not None and self.pending_op.kind is OpKind.STORE

    @property
    def finished(self) -> bool:
        return self.state is L1State.I and self.pending_op is None and not self.sent_dests

    def key(self) -> tuple:
        return (
            self.addr, self.state.value, self.data, self.tokens.count, self.tokens.owner,
            self.ledger_key(),
            self.boss.sort_key if self.boss else None,
            (self.boss_priority.birth, self.boss_priority.node) if self.boss_priority else None,
            _op_key(self.pending_op), self.issued,
            tuple(_op_key(op) for op in self.waiting),
            self.stalled_in.value if self.stalled_in else None,
        )


class L1Cache:
    """Set-associative line store with per-set LRU order"""

    def __init__(self, sets: int, ways: int):
        self.sets = sets
        self.ways = ways
        self.lines: Dict[int, L1Line] = {}
        self.lru: List[List[int]] = [[] for _ in range(sets)]

    def clone(self) -> "L1Cache":
        twin = L1Cache(self.sets, self.ways)
        twin.lines = {addr: line.clone() for addr, line in self.lines.items()}
        twin.lru = [list(order) for order in self.lru]
        return twin

    def set_of(self, addr: int) -> int:
        return addr % self.sets

    def get(self, addr: int) -> Optional[L1Line]:
        return self.lines.get(addr)

    def has_room(self, addr: int) -> bool:
        return len(self.lru[self.set_of(addr)]) < self.ways

    def allocate(self, addr: int) -> L1Line:
        if addr in self.lines:
            raise ProtocolFault(f"block {addr} already resident")
        line = L1Line(addr)
        self.lines[addr] = line
        self.lru[self.set_of(addr)].append(addr)
        return line

    def touch(self, addr: int):
        order = self.lru[self.set_of(addr)]
        order.remove(addr)
        order.append(addr)

    def victim(self, addr: int) -> L1Line:
        return self.lines[self.lru[self.set_of(addr)][0]]

    def free(self, addr: int):
        del self.lines[addr]
        self.lru[self.set_of(addr)].remove(addr)


class L1Controller(Controller):
    name = "L1"
    stable_after_owner_only_send = L1State.PX

    ACTIONS = {
        **Controller.ACTIONS,
        ActionKind.SEND_GETS: "_send_gets",
        ActionKind.SEND_GETX: "_send_getx",
        ActionKind.DO_LOAD: "_do_load",
        ActionKind.DO_STORE: "_do_store",
        ActionKind.REPLACE: "_replace",
        ActionKind.UPDATE: "_update",
        ActionKind.BOUNCE_DATA: "_bounce_l2",
        ActionKind.BOUNCE_L2: "_bounce_l2",
        ActionKind.BOUNCE_TO_BOSS: "_bounce_to_boss",
        ActionKind.ASK_TO_RETRY_LATER: "_ask_to_retry_later",
        ActionKind.RETRY_WITH_BOSS: "_retry_with_boss",
        ActionKind.SEND_SPECIAL_GETS: "_send_special_gets",
        ActionKind.SEND_SPECIAL_GETX: "_send_special_getx",
    }

    def __init__(self, index: int, config):
        super().__init__(l1_node(index), config)
        self.index = index
        self.cache = L1Cache(config.l1_sets, config.l1_ways)
        self.lines = self.cache.lines
        self.peers: Tuple[NodeId, ...] = tuple(
            l1_node(j) for j in range(config.n_l1) if j != index
        ) + (L2_NODE,)
        self.other_l1s: Tuple[NodeId, ...] = self.peers[:-1]

    def clone(self) -> "L1Controller":
        twin = copy.copy(self)
        twin.cache = self.cache.clone()
        twin.lines = twin.cache.lines
        return twin

    def lookup(self, state, event):
        return l1_table_lookup(state, event, self.config.mode)

    # ==================== CLASSIFICATION ====================

    def classify_processor(self, op: ProcessorOp) -> Tuple[EventKind, L1Line]:
        """Load/Store on the resident or a fresh line; Replacement on the LRU victim when the set is full"""
        line = self.cache.get(op.addr)
        if line is not None:
            return OP_EVENTS[op.kind], line
        if self.cache.has_room(op.addr):
            return OP_EVENTS[op.kind], self.cache.allocate(op.addr)
        return EventKind.REPLACEMENT, self.cache.victim(op.addr)

    def classify_message(self, line: L1Line, msg: Message) -> EventKind:
        kind = msg.kind
        if kind is MessageKind.GETX:
            if line.pending_store and msg.priority is not None and msg.priority.beats(line.pending_op.priority):
                if msg.priority.beats(line.boss_priority):
                    line.boss = msg.requester
                    line.boss_priority = msg.priority
                return EventKind.FREEZE_GETX
            return EventKind.GETX
        if kind in PAYLOAD_EVENTS:
            count = line.tokens.count + msg.payload.count
            owner = line.tokens.owner or msg.payload.owner
            if owner and count == self.total_tokens:
                return EventKind.DATA_ALL_TOKENS
            return PAYLOAD_EVENTS[kind]
        return PLAIN_EVENTS[kind]

    # ==================== STIMULI ====================

    def issue(self, op: ProcessorOp, effects: Effects, kind: Optional[str] = None):
        """Processor operation from the attached cpu"""
        event, line = self.classify_processor(op)
        if event is EventKind.REPLACEMENT:
            cell = self.dispatch(line, event, op, effects, kind)
            if cell.is_normal:
                # parked on the victim until it is freed
                line.waiting.append(op)
                line.stalled_in = line.state
        else:
            self.cache.touch(op.addr)
            self.dispatch(line, event, op, effects, kind)
        self._tidy(line, effects)

    def receive(self, msg: Message, effects: Effects):
        line = self.cache.get(msg.addr)
        resident = line is not None
        if resident and line.state is L1State.IS and msg.kind is MessageKind.TOKENS:
            # tokens without data cannot satisfy the load: handled as for an absent block
            resident = False
        if not resident:
            line = L1Line(msg.addr)
        event = self.classify_message(line, msg)
        if event is EventKind.ACK:
            self.on_ack(line, msg, effects)
        else:
            self.dispatch(line, event, msg, effects)
        if resident:
            self._tidy(line, effects)
        elif not line.finished:
            raise ProtocolFault(f"{self.node} a={msg.addr}: absent line changed to {line.state}")

    def reissuable(self) -> Optional[L1Line]:
        """The line whose pending operation is oldest, if it may be re-requested"""
        waiting = [line for line in self.cache.lines.values()
                   if line.pending_op is not None and line.state in REISSUABLE]
        return min(waiting, key=lambda line: line.pending_op.priority, default=None)

    def reissue(self, effects: Effects) -> bool:
        """Re-send the pending request of a line nobody is answering"""
        line = self.reissuable()
        if line is None:
            return False
        op = line.pending_op
        if line.state is L1State.I:
            self.dispatch(line, OP_EVENTS[op.kind], op, effects, "reissue")
        elif line.state is L1State.F:
            retry = Message(
                MessageKind.RETRY, line.addr, self.node, self.node, origin=self.node,
                requester=self.node, priority=op.priority, retry_kind=RetryKind.BROADCAST,
            )
            self.dispatch(line, EventKind.RETRY, retry, effects, "reissue")
        else:
            action = ActionKind.SEND_GETS if op.kind is OpKind.LOAD else ActionKind.SEND_GETX
            self._broadcast_request(line, _request_kind(op), op.priority, effects)
            effects.record(TraceRecord(
                kind="reissue", node=self.node, addr=line.addr, before=str(line.state),
                actions=(action.value,), after=str(line.state), detail=str(op),
            ))
        self._tidy(line, effects)
        return True

    # ==================== STATE CHANGES ====================

    def on_state_change(self, line: L1Line, before, effects: Effects):
        state = line.state
        if state is L1State.I:
            if not line.tokens.empty:
                logger.info("%s a=%d entered I holding %s", self.node, line.addr, line.tokens)
            line.tokens = NO_TOKENS
            line.data = None
            line.boss = None
            line.boss_priority = None
            if line.pending_op is not None:
                self.dispatch(line, OP_EVENTS[line.pending_op.kind], line.pending_op, effects, "replay")
            return
        op = line.pending_op
        if op is None:
            return
        if (op.kind is OpKind.LOAD and state in LOAD_READY) or (op.kind is OpKind.STORE and state in STORE_READY):
            self.dispatch(line, OP_EVENTS[op.kind], op, effects, "replay")

    def _tidy(self, line: L1Line, effects: Effects):
        """Free a finished line and retry whatever stalled on it"""
        if self.cache.get(line.addr) is not line:
            return
        if line.finished:
            self.cache.free(line.addr)
            queued = list(line.waiting)
            line.waiting.clear()
            for op in queued:
                self.issue(op, effects, "replay")
            return
        if line.waiting and line.state is not line.stalled_in:
            queued = list(line.waiting)
            line.waiting.clear()
            line.stalled_in = None
            for op in queued:
                self.issue(op, effects, "replay")

    # ==================== REQUESTS ====================

    def _broadcast_request(self, line: L1Line, kind: MessageKind, priority: Priority, effects: Effects,
                           delayed: bool = False):
        msg = Message(kind, line.addr, self.node, self.node, origin=self.node,
                      requester=self.node, priority=priority)
        effects.broadcast(msg, self.peers, delayed)

    def _request(self, line: L1Line, firing: Firing, effects: Effects, kind: MessageKind):
        op = firing.stimulus if isinstance(firing.stimulus, ProcessorOp) else line.pending_op
        if op is None:
            raise ProtocolFault(f"{self.node} a={line.addr}: {kind.value} without a pending operation")
        line.pending_op = op
        line.issued = True
        self._broadcast_request(line, kind, op.priority, effects)

    def _send_gets(self, line, firing, effects):
        self._request(line, firing, effects, MessageKind.GETS)

    def _send_getx(self, line, firing, effects):
        self._request(line, firing, effects, MessageKind.GETX)
        if self.config.mode is TableMode.ERRATA and firing.next is None and line.state is L1State.O:
            # the owner now collects the rest of the tokens like any other writer
            firing.next = L1State.SM

    def _special(self, line: L1Line, firing: Firing, effects: Effects, special: MessageKind, plain: MessageKind):
        op = line.pending_op
        if op is None:
            raise ProtocolFault(f"{self.node} a={line.addr}: {special.value} without a pending operation")
        msg = firing.stimulus
        if msg.kind is MessageKind.COMPLETE:
            hints = {msg.src}
        elif msg.retry_kind is RetryKind.HINT:
            hints = set(msg.hints)
        else:
            hints = set()
        hints.discard(self.node)
        if hints:
            for dest in sorted(hints):
                effects.send(Message(special, line.addr, self.node, dest, origin=self.node,
                                     requester=self.node, priority=op.priority))
            return
        later = msg.kind is MessageKind.RETRY and msg.retry_kind is RetryKind.LATER
        self._broadcast_request(line, plain, op.priority, effects, delayed=later)

    def _send_special_gets(self, line, firing, effects):
        self._special(line, firing, effects, MessageKind.SPECIAL_GETS, MessageKind.GETS)

    def _send_special_getx(self, line, firing, effects):
        self._special(line, firing, effects, MessageKind.SPECIAL_GETX, MessageKind.GETX)

    # ==================== COMPLETION ====================

    def _do_load(self, line: L1Line, firing: Firing, effects: Effects):
        op = firing.stimulus
        if line.tokens.empty or line.data is None:
            raise ProtocolFault(f"{self.node} a={line.addr}: load without a token and data")
        effects.completions.append(Completion(op.cpu, OpKind.LOAD, line.addr, line.data))
        line.pending_op = None
        line.issued = False

    def _do_store(self, line: L1Line, firing: Firing, effects: Effects):
        op = firing.stimulus
        if line.tokens.count != self.total_tokens or not line.tokens.owner:
            raise ProtocolFault(f"{self.node} a={line.addr}: store with only {line.tokens}")
        line.data = op.value
        effects.completions.append(Completion(op.cpu, OpKind.STORE, line.addr, op.value))
        if line.issued and self.other_l1s:
            done = Message(MessageKind.COMPLETE, line.addr, self.node, self.node, origin=self.node,
                           requester=self.node, priority=op.priority)
            effects.broadcast(done, self.other_l1s)
        line.pending_op = None
        line.issued = False
        line.boss = None
        line.boss_priority = None

    # ==================== PAYLOADS ====================

    def _replace(self, line: L1Line, firing: Firing, effects: Effects):
        # clean blocks give back tokens only
        self._ship(line, L2_NODE, line.tokens, effects, with_data=line.tokens.owner)

    def _bounce_l2(self, line, firing, effects):
        self._bounce(line, firing, effects, L2_NODE)

    def _bounce_to_boss(self, line: L1Line, firing: Firing, effects: Effects):
        if line.boss is None:
            raise ProtocolFault(f"{self.node} a={line.addr}: bounceToBoss without a boss")
        self._bounce(line, firing, effects, line.boss)

    # ==================== RETRIES ====================

    def _ask_to_retry_later(self, line, firing, effects):
        self._retry(line, firing, effects, RetryKind.LATER)

    def _retry_with_boss(self, line: L1Line, firing: Firing, effects: Effects):
        self._retry(line, firing, effects, RetryKind.HINT, {line.boss} if line.boss else set())


def _request_kind(op: ProcessorOp) -> MessageKind:
    return MessageKind.GETS if op.kind is OpKind.LOAD else MessageKind.GETX
