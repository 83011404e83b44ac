"""
Protocol vocabulary: nodes, token bundles, priorities, messages, controller
states, events and actions.

Everything here is immutable so that controllers, the interconnect and the
explorer can share values freely.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property, total_ordering
from typing import FrozenSet, Optional

from lockesim.core.errors import ProtocolFault


# ==================== NODES ====================

class NodeKind(Enum):
    L1 = "L1"
    L2 = "L2"
    MEMORY = "MEM"


_KIND_RANK = {NodeKind.L1: 0, NodeKind.L2: 1, NodeKind.MEMORY: 2}


@total_ordering
@dataclass(frozen=True)
class NodeId:
    kind: NodeKind
    index: int = 0

    @property
    def sort_key(self):
        return (_KIND_RANK[self.kind], self.index)

    def __lt__(self, other):
        if not isinstance(other, NodeId):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __str__(self):
        if self.kind is NodeKind.L1:
            return f"L1#{self.index}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        text = text.strip()
        if text.startswith("L1#"):
            return cls(NodeKind.L1, int(text[3:]))
        if text == "L2":
            return L2_NODE
        if text == "MEM":
            return MEMORY_NODE
        raise ValueError(f"unknown node '{text}'")


def l1_node(index: int) -> NodeId:
    return NodeId(NodeKind.L1, index)


L2_NODE = NodeId(NodeKind.L2)
MEMORY_NODE = NodeId(NodeKind.MEMORY)


# ==================== TOKENS ====================

@dataclass(frozen=True)
class TokenBundle:
    """A number of tokens, one of which may be the owner token"""
    count: int = 0
    owner: bool = False

    def __post_init__(self):
        if self.count < 0:
            raise ProtocolFault(f"negative token count {self.count}")
        if self.owner and self.count < 1:
            raise ProtocolFault("owner flag without any token")

    @property
    def empty(self) -> bool:
        return self.count == 0

    def merge(self, other: "TokenBundle") -> "TokenBundle":
        if self.owner and other.owner:
            raise ProtocolFault("merging two owner tokens")
        return TokenBundle(self.count + other.count, self.owner or other.owner)

    def minus(self, other: "TokenBundle") -> "TokenBundle":
        if other.count > self.count or (other.owner and not self.owner):
            raise ProtocolFault(f"cannot take {other} out of {self}")
        return TokenBundle(self.count - other.count, self.owner and not other.owner)

    def __str__(self):
        return f"{{{self.count},o}}" if self.owner else f"{{{self.count}}}"


NO_TOKENS = TokenBundle()


# ==================== PRIORITY ====================

@dataclass(frozen=True, order=True)
class Priority:
    """Smaller birth wins; ties go to the smaller node index"""
    birth: int
    node: int

    def beats(self, other: Optional["Priority"]) -> bool:
        return other is None or self < other

    def __str__(self):
        return f"({self.birth},#{self.node})"


# ==================== MESSAGES ====================

class MessageKind(Enum):
    GETS = "GETS"
    GETX = "GETX"
    SPECIAL_GETS = "SPECIAL_GETS"
    SPECIAL_GETX = "SPECIAL_GETX"
    DATA_SHARED = "DATA_SHARED"
    DATA_OWNER = "DATA_OWNER"
    DATA_ALL_TOKENS = "DATA_ALL_TOKENS"
    TOKENS = "TOKENS"
    ACK = "ACK"
    RETRY = "RETRY"
    COMPLETE = "COMPLETE"


REQUEST_KINDS = frozenset({
    MessageKind.GETS, MessageKind.GETX,
    MessageKind.SPECIAL_GETS, MessageKind.SPECIAL_GETX,
})
PAYLOAD_KINDS = frozenset({
    MessageKind.DATA_SHARED, MessageKind.DATA_OWNER,
    MessageKind.DATA_ALL_TOKENS, MessageKind.TOKENS,
})


class RetryKind(Enum):
    BROADCAST = "BROADCAST"
    LATER = "LATER"
    HINT = "HINT"


class OpKind(Enum):
    LOAD = "LD"
    STORE = "ST"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    addr: int
    src: NodeId
    dest: NodeId
    origin: NodeId
    requester: Optional[NodeId] = None
    priority: Optional[Priority] = None
    payload: Optional[TokenBundle] = None
    data: Optional[int] = None
    retry_kind: Optional[RetryKind] = None
    hints: FrozenSet[NodeId] = field(default_factory=frozenset)
    ticket: Optional[NodeId] = None     # node whose ack settles the sender's ledger entry
    seq: int = 0

    def __post_init__(self):
        kind = self.kind
        if kind in PAYLOAD_KINDS:
            if self.payload is None or self.payload.count < 1:
                raise ProtocolFault(f"{kind.value} without tokens")
            if kind is MessageKind.TOKENS and (self.payload.owner or self.data is not None):
                raise ProtocolFault("TOKENS carries neither owner nor data")
            if kind is not MessageKind.TOKENS and self.data is None:
                raise ProtocolFault(f"{kind.value} without data")
            if kind is MessageKind.DATA_SHARED and self.payload.owner:
                raise ProtocolFault("DATA_SHARED carries the owner token")
            if kind in (MessageKind.DATA_OWNER, MessageKind.DATA_ALL_TOKENS) and not self.payload.owner:
                raise ProtocolFault(f"{kind.value} without the owner token")
        elif self.payload is not None:
            raise ProtocolFault(f"{kind.value} cannot carry tokens")
        if kind is MessageKind.RETRY:
            if self.retry_kind is RetryKind.HINT and not self.hints:
                raise ProtocolFault("RETRY(HINT) without hints")
            if self.retry_kind is not RetryKind.HINT and self.hints:
                raise ProtocolFault("hints on a non-hint RETRY")

    @property
    def carries_tokens(self) -> bool:
        return self.payload is not None

    def readdress(self, src: NodeId, dest: NodeId, **changes) -> "Message":
        return replace(self, src=src, dest=dest, seq=0, **changes)

    def descriptor(self) -> str:
        """Stable text form without the sequence number"""
        return self._text

    @cached_property
    def _text(self) -> str:
        parts = [self.kind.value, f"a={self.addr}", f"{self.src}->{self.dest}", f"org={self.origin}"]
        if self.requester is not None:
            parts.append(f"req={self.requester}")
        if self.priority is not None:
            parts.append(f"pri={self.priority}")
        if self.payload is not None:
            parts.append(f"tok={self.payload}")
        if self.data is not None:
            parts.append(f"val={self.data}")
        if self.retry_kind is not None:
            parts.append(f"retry={self.retry_kind.value}")
        if self.hints:
            parts.append("hints=" + ",".join(str(h) for h in sorted(self.hints)))
        if self.ticket is not None and self.ticket != (self.src if self.kind is MessageKind.ACK else self.dest):
            parts.append(f"for={self.ticket}")
        return " ".join(parts)

    def __str__(self):
        return f"#{self.seq} {self.descriptor()}"


def payload_kind(bundle: TokenBundle, has_data: bool, total: int) -> MessageKind:
    """Wire kind for shipping `bundle` (with data when available)"""
    if not has_data:
        if bundle.owner:
            raise ProtocolFault("owner token cannot travel without data")
        return MessageKind.TOKENS
    if bundle.owner and bundle.count == total:
        return MessageKind.DATA_ALL_TOKENS
    if bundle.owner:
        return MessageKind.DATA_OWNER
    return MessageKind.DATA_SHARED


# ==================== STATES ====================

class L1State(Enum):
    I = "I"
    S = "S"
    O = "O"
    E = "E"
    M = "M"
    IS = "IS"
    IM = "IM"
    SM = "SM"
    PS = "PS"
    PX = "PX"
    PO = "PO"
    F = "F"

    def __str__(self):
        return self.value


class L2State(Enum):
    I = "I"
    A = "A"
    S = "S"
    O = "O"
    M = "M"
    PA = "PA"
    PT = "PT"
    PX = "PX"
    PO = "PO"

    def __str__(self):
        return self.value


L1_STABLE = frozenset({L1State.I, L1State.S, L1State.O, L1State.E, L1State.M})
L1_CONTROL = frozenset({L1State.PS, L1State.PX, L1State.PO})


# ==================== EVENTS ====================

class EventKind(Enum):
    LOAD = "Load"
    STORE = "Store"
    REPLACEMENT = "Replacement"
    GETS = "Gets"
    GETX = "Getx"
    FREEZE_GETX = "FreezeGETX"
    L1_GETS = "L1_Gets"
    L1_GETX = "L1_Getx"
    SPECIAL_GETS = "SpecialGETS"
    SPECIAL_GETX = "SpecialGETX"
    DATA_SHARED = "DataShared"
    DATA_OWNER = "DataOwner"
    DATA_ALL_TOKENS = "DataAllTokens"
    TOKENS = "Tokens"
    ACK = "Ack"
    RETRY = "Retry"
    COMPLETE = "Complete"

    def __str__(self):
        return self.value


L1_EVENTS = (
    EventKind.LOAD, EventKind.STORE, EventKind.REPLACEMENT,
    EventKind.GETS, EventKind.GETX, EventKind.FREEZE_GETX,
    EventKind.SPECIAL_GETS, EventKind.SPECIAL_GETX,
    EventKind.DATA_SHARED, EventKind.DATA_OWNER, EventKind.DATA_ALL_TOKENS,
    EventKind.ACK, EventKind.RETRY, EventKind.COMPLETE,
)

L2_EVENTS = (
    EventKind.REPLACEMENT, EventKind.L1_GETS, EventKind.L1_GETX,
    EventKind.SPECIAL_GETS, EventKind.SPECIAL_GETX,
    EventKind.DATA_SHARED, EventKind.DATA_OWNER, EventKind.DATA_ALL_TOKENS,
    EventKind.TOKENS, EventKind.ACK,
)


# ==================== ACTIONS ====================

class ActionKind(Enum):
    SEND_GETS = "sendGETS"
    SEND_GETX = "sendGETX"
    DO_LOAD = "doLoad"
    DO_STORE = "doStore"
    REPLACE = "replace"
    SEND_1_TOKEN = "send1Token"
    SEND_TOKEN = "sendToken"
    SEND_ALL_TOKENS = "sendAllTokens"
    SEND_TOKENS = "sendTokens"
    UPDATE = "update"
    SEND_ACK = "sendAck"
    BOUNCE_DATA = "bounceData"
    BOUNCE_L2 = "bounceL2"
    BOUNCE_TO_BOSS = "bounceToBoss"
    ASK_TO_RETRY_BC = "askToRetryBC"
    ASK_RETRY_BC = "askRetryBC"
    ASK_TO_RETRY_LATER = "askToRetryLater"
    INFORM_TOKEN_DEST = "informTokenDest"
    INFORM_TOKENS_DEST = "informTokensDest"
    INFORM_OWNER_DEST = "informOwnerDest"
    RETRY_WITH_BOSS = "retryWithBoss"
    SEND_SPECIAL_GETS = "sendSpecialGETS"
    SEND_SPECIAL_GETX = "sendSpecialGETX"
    STORE_DATA = "storeData"
    UPDATE_NUM_TOKENS = "updateNumTokens"
    ISSUE_WRITEBACK = "issueWriteback"

    def __str__(self):
        return self.value

    @property
    def canonical(self) -> "ActionKind":
        return ACTION_ALIASES.get(self, self)


# literal spellings that execute as another action
ACTION_ALIASES = {
    ActionKind.SEND_TOKEN: ActionKind.SEND_1_TOKEN,
    ActionKind.ASK_RETRY_BC: ActionKind.ASK_TO_RETRY_BC,
}

# spelling variants normalized at transcription time in every mode
ACTION_SPELLINGS = {
    "sendAllToken": ActionKind.SEND_ALL_TOKENS,
}


class Marker(Enum):
    NORMAL = "normal"
    STALL = "z"
    IGNORE = "i"
    ERROR = "e"


class TableMode(Enum):
    STRICT = "strict"
    ERRATA = "errata"


@dataclass(frozen=True)
class TransitionSpec:
    """One table cell: ordered actions and an optional next state"""
    actions: tuple = ()
    next: Optional[Enum] = None
    marker: Marker = Marker.NORMAL

    def __post_init__(self):
        if self.marker is not Marker.NORMAL and (self.actions or self.next is not None):
            raise ValueError("marker cells carry no actions and no next state")

    @property
    def is_normal(self) -> bool:
        return self.marker is Marker.NORMAL

    def render(self) -> str:
        if not self.is_normal:
            return self.marker.value
        parts = [a.value for a in self.actions]
        if self.next is not None:
            parts.append(f"/{self.next.value}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str, states) -> "TransitionSpec":
        text = text.strip()
        for marker in (Marker.STALL, Marker.IGNORE, Marker.ERROR):
            if text == marker.value:
                return cls(marker=marker)
        text = text.replace("do Load", "doLoad")
        actions = []
        next_state = None
        for word in text.split():
            if word.startswith("/"):
                next_state = states(word[1:])
            else:
                actions.append(ACTION_SPELLINGS.get(word) or ActionKind(word))
        return cls(tuple(actions), next_state)

    def __str__(self):
        return self.render()


STALL = TransitionSpec(marker=Marker.STALL)
IGNORE = TransitionSpec(marker=Marker.IGNORE)
ERROR = TransitionSpec(marker=Marker.ERROR)
