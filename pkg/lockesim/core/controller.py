"""
Table-driven controller machinery shared by the L1 and L2 controllers:
cell dispatch with stall/ignore/error markers, the pending-ack ledger and
the actions both tables use.
"""
import copy
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, List, Optional

from lockesim.core.effects import Effects, TraceRecord
from lockesim.core.errors import ProtocolError, ProtocolFault
from lockesim.core.protocol import (
    ActionKind, EventKind, Marker, Message, MessageKind, NodeId, NO_TOKENS,
    RetryKind, TokenBundle, TransitionSpec, payload_kind,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ticket:
    """A token-carrying send that has not been acknowledged yet"""
    dest: NodeId
    bundle: TokenBundle

    def __str__(self):
        return f"{self.dest}{self.bundle}"


@dataclass
class CacheLine:
    addr: int
    state: Enum
    data: Optional[int] = None
    tokens: TokenBundle = NO_TOKENS
    sent_dests: List[Ticket] = field(default_factory=list)
    waiting: Deque = field(default_factory=deque)
    stalled_in: Optional[Enum] = None

    @property
    def pending_acks(self) -> int:
        return len(self.sent_dests)

    def clone(self):
        return replace(self, sent_dests=list(self.sent_dests), waiting=deque(self.waiting))

    def ledger_key(self) -> tuple:
        return tuple((t.dest.sort_key, t.bundle.count, t.bundle.owner) for t in self.sent_dests)


@dataclass
class Firing:
    """A cell being executed; actions may redirect the next state"""
    cell: TransitionSpec
    event: EventKind
    stimulus: object
    next: Optional[Enum]


def describe(stimulus) -> str:
    if isinstance(stimulus, Message):
        return stimulus.descriptor()
    return str(stimulus)


class Controller:
    """Base for the table interpreters; subclasses supply the table and the local actions"""

    name = "controller"
    stable_after_owner_only_send = None      # state entered when send1Token must ship the owner

    # canonical action -> method name
    ACTIONS = {
        ActionKind.SEND_ACK: "_send_ack",
        ActionKind.SEND_ALL_TOKENS: "_send_all_tokens",
        ActionKind.SEND_1_TOKEN: "_send_1_token",
        ActionKind.ASK_TO_RETRY_BC: "_ask_to_retry_bc",
        ActionKind.INFORM_TOKEN_DEST: "_inform_tokens_dest",
        ActionKind.INFORM_TOKENS_DEST: "_inform_tokens_dest",
        ActionKind.INFORM_OWNER_DEST: "_inform_owner_dest",
    }

    def __init__(self, node: NodeId, config):
        self.node = node
        self.config = config
        self.lines = {}

    @property
    def total_tokens(self) -> int:
        return self.config.tokens

    def clone(self):
        """Copy with private lines; node and config are shared"""
        twin = copy.copy(self)
        twin.lines = {addr: line.clone() for addr, line in self.lines.items()}
        return twin

    # ==================== TABLE ====================

    def lookup(self, state, event: EventKind) -> TransitionSpec:
        raise NotImplementedError

    def on_state_change(self, line, before, effects: Effects):
        """Hook run after a line moved to a different state"""

    def dispatch(self, line, event: EventKind, stimulus, effects: Effects, kind: Optional[str] = None) -> TransitionSpec:
        """Look up the cell for (line.state, event) and carry it out"""
        kind = kind or effects.cause
        before = line.state
        cell = self.lookup(before, event)

        if cell.marker is Marker.ERROR:
            raise ProtocolError(self.node, before, event, describe(stimulus))
        if cell.marker is Marker.STALL:
            line.waiting.append(stimulus)
            line.stalled_in = before
            self._record(effects, "stall", line, before, event, cell, before, stimulus)
            return cell
        if cell.marker is Marker.IGNORE:
            self._record(effects, kind, line, before, event, cell, before, stimulus)
            return cell

        firing = Firing(cell, event, stimulus, cell.next)
        for action in cell.actions:
            self.execute_action(action, line, firing, effects)
        after = firing.next if firing.next is not None else before
        self._record(effects, kind, line, before, event, cell, after, stimulus)
        if after is not before:
            line.state = after
            self.on_state_change(line, before, effects)
        return cell

    def execute_action(self, action: ActionKind, line, firing: Firing, effects: Effects):
        method = self.ACTIONS.get(action.canonical)
        if method is None:
            raise ProtocolFault(f"{action} is not an action of the {self.name} table")
        getattr(self, method)(line, firing, effects)

    def _record(self, effects, kind, line, before, event, cell, after, stimulus):
        message = stimulus if isinstance(stimulus, Message) else None
        record = TraceRecord(
            kind=kind,
            node=self.node,
            addr=line.addr,
            before=str(before),
            event=event.value,
            actions=tuple(a.value for a in cell.actions) if cell.is_normal else (cell.marker.value,),
            after=str(after),
            message=message.descriptor() if message else None,
            src=message.src if message else None,
            detail="" if message else describe(stimulus),
        )
        effects.record(record)
        logger.debug("%s", record)

    # ==================== ACKS ====================

    def on_ack(self, line, msg: Message, effects: Effects):
        """Settle one ticket; the table's Ack cell fires only for the last one"""
        if not line.sent_dests:
            self.dispatch(line, EventKind.ACK, msg, effects)
            return
        self._settle(line, msg)
        if line.sent_dests:
            effects.record(TraceRecord(
                kind=effects.cause, node=self.node, addr=line.addr, before=str(line.state),
                event=EventKind.ACK.value, after=str(line.state), message=msg.descriptor(),
                src=msg.src, detail=f"{line.pending_acks} ack(s) outstanding",
            ))
            return
        if self.lookup(line.state, EventKind.ACK).marker is Marker.ERROR:
            # the state that sent these tokens has already been left
            effects.record(TraceRecord(
                kind="absorb", node=self.node, addr=line.addr, before=str(line.state),
                event=EventKind.ACK.value, after=str(line.state), message=msg.descriptor(), src=msg.src,
            ))
            return
        self.dispatch(line, EventKind.ACK, msg, effects)

    def _settle(self, line, ack: Message) -> Ticket:
        """Remove the ledger entry the ack answers for"""
        dest = ack.ticket or ack.src
        for i, ticket in enumerate(line.sent_dests):
            if ticket.dest == dest:
                return line.sent_dests.pop(i)
        raise ProtocolFault(f"{self.node} a={line.addr}: {ack.descriptor()} matches no pending send "
                            f"(waiting on {', '.join(str(t) for t in line.sent_dests)})")

    # ==================== SENDING ====================

    def _ship(self, line, dest: NodeId, bundle: TokenBundle, effects: Effects,
              with_data: Optional[bool] = None) -> Optional[Message]:
        """Send `bundle` out of the line and open a ticket for it"""
        if bundle.empty:
            return None
        if with_data is None:
            with_data = line.data is not None
        kind = payload_kind(bundle, with_data, self.total_tokens)
        message = Message(
            kind, line.addr, self.node, dest, origin=self.node,
            payload=bundle, data=line.data if with_data else None, ticket=dest,
        )
        line.tokens = line.tokens.minus(bundle)
        line.sent_dests.append(Ticket(dest, bundle))
        if line.tokens.empty:
            line.data = None
        effects.send(message)
        return message

    @staticmethod
    def _requester(firing: Firing) -> NodeId:
        msg = firing.stimulus
        if not isinstance(msg, Message) or msg.requester is None:
            raise ProtocolFault(f"{firing.event} needs a request, got {describe(msg)}")
        return msg.requester

    def _retry(self, line, firing: Firing, effects: Effects, kind: RetryKind, hints=frozenset()):
        requester = self._requester(firing)
        hints = frozenset(hints) - {requester}
        if kind is RetryKind.HINT and not hints:
            kind = RetryKind.BROADCAST
        effects.send(Message(
            MessageKind.RETRY, line.addr, self.node, requester, origin=self.node,
            requester=requester, priority=firing.stimulus.priority,
            retry_kind=kind, hints=hints if kind is RetryKind.HINT else frozenset(),
        ))

    # ==================== SHARED ACTIONS ====================

    def _send_ack(self, line, firing: Firing, effects: Effects):
        msg = firing.stimulus
        effects.send(Message(MessageKind.ACK, line.addr, self.node, msg.origin, origin=self.node,
                             ticket=msg.ticket))

    def _send_all_tokens(self, line, firing: Firing, effects: Effects):
        shipped = self._ship(line, self._requester(firing), line.tokens, effects)
        if shipped is not None and firing.next is None:
            # a cell that names no state still cannot keep a line with nothing left
            firing.next = self.stable_after_owner_only_send

    def _send_1_token(self, line, firing: Firing, effects: Effects):
        held = line.tokens
        if held.empty:
            raise ProtocolFault(f"{self.node} a={line.addr}: send1Token without tokens")
        if held.count - int(held.owner) >= 1:
            self._ship(line, self._requester(firing), TokenBundle(1), effects)
            return
        # only the owner token is left: it travels and the line waits as if all were sent
        self._ship(line, self._requester(firing), held, effects)
        firing.next = self.stable_after_owner_only_send

    def _ask_to_retry_bc(self, line, firing: Firing, effects: Effects):
        self._retry(line, firing, effects, RetryKind.BROADCAST)

    def _inform_tokens_dest(self, line, firing: Firing, effects: Effects):
        self._retry(line, firing, effects, RetryKind.HINT, {t.dest for t in line.sent_dests})

    def _inform_owner_dest(self, line, firing: Firing, effects: Effects):
        owners = {t.dest for t in line.sent_dests if t.bundle.owner}
        self._retry(line, firing, effects, RetryKind.HINT, owners or {t.dest for t in line.sent_dests})

    def _update(self, line, firing: Firing, effects: Effects):
        msg = firing.stimulus
        line.tokens = line.tokens.merge(msg.payload)
        if msg.data is not None:
            line.data = msg.data

    def _bounce(self, line, firing: Firing, effects: Effects, dest: NodeId):
        """Forward a payload unconsumed; the ack still goes to its origin"""
        msg = firing.stimulus
        if ActionKind.SEND_ACK in firing.cell.actions:
            # the sender was acked here, so this node now answers for the payload
            line.sent_dests.append(Ticket(dest, msg.payload))
            effects.send(msg.readdress(self.node, dest, origin=self.node, ticket=dest))
        else:
            effects.send(msg.readdress(self.node, dest))
