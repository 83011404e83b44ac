"""
Shared L2 controller. Blocks start here holding every token; the L2 answers
requests by shipping everything it holds and writes back to memory only on
an explicit directive.
"""
import logging
from dataclasses import dataclass
from typing import Dict

from lockesim.core.controller import CacheLine, Controller, Firing
from lockesim.core.effects import Effects, WritebackRequest
from lockesim.core.errors import ConfigError, ProtocolFault
from lockesim.core.protocol import (
    ActionKind, EventKind, L2State, L2_NODE, MEMORY_NODE, Message, MessageKind,
    NO_TOKENS, TokenBundle,
)
from lockesim.core.tables import l2_table_lookup

logger = logging.getLogger(__name__)

L2_EVENT_FOR = {
    MessageKind.GETS: EventKind.L1_GETS,
    MessageKind.GETX: EventKind.L1_GETX,
    MessageKind.SPECIAL_GETS: EventKind.SPECIAL_GETS,
    MessageKind.SPECIAL_GETX: EventKind.SPECIAL_GETX,
    MessageKind.DATA_SHARED: EventKind.DATA_SHARED,
    MessageKind.DATA_OWNER: EventKind.DATA_OWNER,
    MessageKind.DATA_ALL_TOKENS: EventKind.DATA_ALL_TOKENS,
    MessageKind.TOKENS: EventKind.TOKENS,
    MessageKind.ACK: EventKind.ACK,
}


@dataclass
class L2Line(CacheLine):
    state: L2State = L2State.I

    def key(self) -> tuple:
        return (
            self.addr, self.state.value, self.data, self.tokens.count, self.tokens.owner,
            self.ledger_key(), len(self.waiting),
            self.stalled_in.value if self.stalled_in else None,
        )


class L2Controller(Controller):
    name = "L2"
    stable_after_owner_only_send = L2State.PX

    ACTIONS = {
        **Controller.ACTIONS,
        ActionKind.STORE_DATA: "_store_data",
        ActionKind.UPDATE_NUM_TOKENS: "_update_num_tokens",
        ActionKind.SEND_TOKENS: "_send_tokens",
        ActionKind.ISSUE_WRITEBACK: "_issue_writeback",
    }

    def __init__(self, config):
        super().__init__(L2_NODE, config)
        self.lines: Dict[int, L2Line] = {}

    def lookup(self, state, event):
        return l2_table_lookup(state, event, self.config.mode)

    def fresh_line(self, addr: int) -> L2Line:
        return L2Line(addr, L2State.M, data=self.config.initial_value,
                      tokens=TokenBundle(self.total_tokens, owner=True))

    def line(self, addr: int) -> L2Line:
        """The line for addr, created on first touch with every token"""
        line = self.lines.get(addr)
        if line is None:
            in_set = sum(1 for a in self.lines if a % self.config.l2_sets == addr % self.config.l2_sets)
            if in_set >= self.config.l2_ways:
                raise ConfigError(f"L2 set {addr % self.config.l2_sets} cannot hold block {addr}; "
                                  f"raise l2_ways or l2_sets")
            line = self.lines[addr] = self.fresh_line(addr)
        return line

    def view(self, addr: int) -> L2Line:
        """Current line without creating it"""
        return self.lines.get(addr) or self.fresh_line(addr)

    # ==================== CLASSIFICATION ====================

    def classify_message(self, line: L2Line, msg: Message) -> EventKind:
        event = L2_EVENT_FOR.get(msg.kind)
        if event is None:
            raise ProtocolFault(f"{msg.kind.value} routed to the L2: {msg.descriptor()}")
        if event is EventKind.DATA_SHARED and line.tokens.owner:
            # the owner already has the data, only the tokens are news
            return EventKind.TOKENS
        return event

    # ==================== STIMULI ====================

    def receive(self, msg: Message, effects: Effects):
        line = self.line(msg.addr)
        event = self.classify_message(line, msg)
        if event is EventKind.ACK:
            self.on_ack(line, msg, effects)
        else:
            self.dispatch(line, event, msg, effects)
        self._retry_waiting(line, effects)

    def replace(self, addr: int, effects: Effects):
        """Write the block back to memory"""
        line = self.line(addr)
        self.dispatch(line, EventKind.REPLACEMENT, WritebackRequest(addr), effects)
        self._retry_waiting(line, effects)

    def _retry_waiting(self, line: L2Line, effects: Effects):
        if line.waiting and line.state is not line.stalled_in:
            queued = list(line.waiting)
            line.waiting.clear()
            line.stalled_in = None
            for request in queued:
                self.dispatch(line, EventKind.REPLACEMENT, request, effects, "replay")

    def on_state_change(self, line: L2Line, before, effects: Effects):
        if line.state is L2State.I:
            if not line.tokens.empty:
                logger.info("L2 a=%d entered I holding %s", line.addr, line.tokens)
            line.tokens = NO_TOKENS
            line.data = None

    # ==================== ACTIONS ====================

    def _store_data(self, line: L2Line, firing: Firing, effects: Effects):
        msg = firing.stimulus
        line.tokens = line.tokens.merge(msg.payload)
        line.data = msg.data

    def _update_num_tokens(self, line: L2Line, firing: Firing, effects: Effects):
        msg = firing.stimulus
        line.tokens = line.tokens.merge(msg.payload)
        if line.data is None and msg.data is not None:
            line.data = msg.data

    def _send_tokens(self, line: L2Line, firing: Firing, effects: Effects):
        self._ship(line, self._requester(firing), line.tokens, effects, with_data=False)

    def _issue_writeback(self, line: L2Line, firing: Firing, effects: Effects):
        self._ship(line, MEMORY_NODE, line.tokens, effects)
