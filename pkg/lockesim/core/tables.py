"""
The L1 and L2 controller state tables, transcribed cell by cell, plus the
errata overrides, lookup, validation and the text dump used by the golden
tests.

Cells use the table notation: actions left to right, "/X" for the next
state, "z" stall, "i" ignore, "e" error.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from lockesim.core.protocol import (
    ActionKind, EventKind, L1State, L1_EVENTS, L2State, L2_EVENTS,
    TableMode, TransitionSpec, ACTION_ALIASES,
)


# ==================== L1 CONTROLLER ====================
# columns: Load | Store | Replacement | Gets | Getx | FreezeGETX | SpecialGETS |
#          SpecialGETX | DataShared | DataOwner | DataAllTokens | Ack | Retry | Complete

L1_ROWS = {
    L1State.I: "sendGETS | sendGETX | e | i | i | i | askToRetryBC | askToRetryBC | "
               "bounceData | bounceData | bounceData | e | i | i",
    L1State.S: "do Load | sendGETX | replace /PS | i | sendAllToken /PS | sendAllToken /PX | askToRetryBC | "
               "sendAllToken /PS | update sendAck | update sendAck /O | update sendAck /M | e | i | i",
    L1State.O: "do Load | sendGETX | replace /PX | send1Token /PO | sendAllTokens /PX | sendAllTokens /PX | "
               "send1Token /PO | sendAllTokens /PX | update sendAck | update sendAck | update sendAck /M | e | i | i",
    L1State.E: "do Load | doStore | replace /PX | send1Token /PO | sendAllTokens /PX | sendAllTokens /PX | "
               "send1Token /PO | sendAllTokens /PX | e | e | e | e | i | i",
    L1State.M: "do Load | doStore | replace /PX | send1Token /PO | sendAllTokens /PX | sendAllTokens /PX | "
               "send1Token /PO | sendAllTokens /PX | e | e | e | e | i | i",
    L1State.IS: "z | z | z | i | i | i | askToRetryBC | askToRetryBC | "
                "update sendAck /S | update sendAck /O | update sendAck /M | e | sendSpecialGETS | i",
    L1State.IM: "z | z | z | i | i | sendAllTokens /F | askToRetryBC | askToRetryBC | "
                "update sendAck /SM | update sendAck /SM | update sendAck /M | e | sendSpecialGETX | sendSpecialGETX",
    L1State.SM: "z | z | z | askToRetryLater | i | sendAllTokens /F | askToRetryLater | askToRetryLater | "
                "update sendAck | update sendAck | update sendAck /M | e | sendSpecialGETX | sendSpecialGETX",
    L1State.PS: "z | z | z | i | informTokenDest | informTokenDest | askRetryBC | informTokenDest | "
                "sendAck bounceL2 | sendAck bounceL2 /PX | sendAck bounceL2 /PX | /I | i | i",
    L1State.PX: "z | z | z | informOwnerDest | informTokensDest | informTokensDest | informOwnerDest | "
                "informTokensDest | bounceL2 | bounceL2 | bounceL2 | /I | i | i",
    L1State.PO: "z | z | z | send1Token | informTokensDest sendAllTokens /PX | informTokensDest sendAllTokens /PX | "
                "sendToken | informTokensDest sendAllTokens /PX | update sendAck | update sendAck | "
                "update sendAck | /I | i | i",
    L1State.F: "z | z | z | retryWithBoss | retryWithBoss | retryWithBoss | i | i | "
               "bounceToBoss | bounceToBoss | bounceToBoss | /F | sendGETX | sendGETX",
}


# ==================== L2 CONTROLLER ====================
# columns: Replacement | L1_Gets | L1_Getx | SpecialGETS | SpecialGETX |
#          DataShared | DataOwner | DataAllTokens | Tokens | Ack

L2_ROWS = {
    L2State.I: "e | i | i | askToRetryBC | askToRetryBC | storeData sendAck /S | storeData sendAck /O | "
               "storeData sendAck /M | updateNumTokens sendAck /A | e",
    L2State.A: "issueWriteback /PX | i | sendTokens /PX | askToRetryBC | sendTokens /PX | "
               "storeData sendAck /S | storeData sendAck /O | storeData sendAck /M | updateNumTokens sendAck | e",
    L2State.S: "issueWriteback /PX | i | sendAllToken /PX | askToRetryBC | sendAllToken /PX | "
               "updateNumTokens sendAck | updateNumTokens sendAck /O | updateNumTokens sendAck /M | "
               "updateNumTokens sendAck | e",
    L2State.O: "issueWriteback /PX | send1Token /PO | sendAllTokens /PX | send1Token /PO | sendAllTokens /PX | "
               "e | updateNumTokens sendAck | updateNumTokens sendAck /M | updateNumTokens sendAck | e",
    L2State.M: "issueWriteback /PX | sendAllTokens /PX | sendAllTokens /PX | sendAllTokens /PX | "
               "sendAllTokens /PX | e | e | e | e | e",
    L2State.PA: "z | informOwnerDest | sendAllTokens informTokensDest /PX | askToRetryBC | sendAllTokens /PX | "
                "storeData sendAck /PT | storeData sendAck /PO | storeData sendAck /PO | updateNumTokens sendAck | /A",
    L2State.PT: "z | informOwnerDest | sendAllTokens informTokenDest | askRetryBC | informTokenDest sendAllTokens | "
                "storeData sendAck | updateNumTokens sendAck /PO | updateNumTokens sendAck /PO | "
                "updateNumTokens sendAck | /S",
    L2State.PX: "z | informOwnerDest | informTokensDest | informOwnerDest | informTokensDest | "
                "storeData sendAck /PT | storeData sendAck /PO | storeData sendAck /PO | "
                "updateNumTokens sendAck /PA | /I",
    L2State.PO: "z | send1Token | informTokensDest sendAllTokens /PX | sendAllTokens /PX | "
                "informTokensDest sendAllTokens /PX | e | updateNumTokens sendAck | updateNumTokens sendAck | "
                "updateNumTokens sendAck | /I",
}


def _build(rows, events, states) -> Dict[Tuple, TransitionSpec]:
    table = {}
    for state, row in rows.items():
        cells = row.split("|")
        if len(cells) != len(events):
            raise ValueError(f"row {state} has {len(cells)} cells, expected {len(events)}")
        for event, cell in zip(events, cells):
            table[(state, event)] = TransitionSpec.parse(cell, states)
    return table


L1_TABLE = _build(L1_ROWS, L1_EVENTS, L1State)
L2_TABLE = _build(L2_ROWS, L2_EVENTS, L2State)


# ==================== ERRATA ====================

@dataclass(frozen=True)
class Override:
    table: str
    state: object
    event: EventKind
    cell: TransitionSpec
    reason: str


def _l1(state, event, text, reason):
    return Override("L1", state, event, TransitionSpec.parse(text, L1State), reason)


def _l2(state, event, text, reason):
    return Override("L2", state, event, TransitionSpec.parse(text, L2State), reason)


OVERRIDES: List[Override] = [
    _l1(L1State.I, EventKind.LOAD, "sendGETS /IS", "#1 a miss must enter the transient state IS"),
    _l1(L1State.I, EventKind.STORE, "sendGETX /IM", "#1 a miss must enter the transient state IM"),
    _l1(L1State.S, EventKind.STORE, "sendGETX /SM", "#2 keeps data + tokens with a GETX outstanding"),
    _l1(L1State.PO, EventKind.ACK, "/O", "#3 PO still holds the owner token"),
    _l2(L2State.PO, EventKind.ACK, "/O", "#3 PO still holds the owner token"),
    _l1(L1State.E, EventKind.STORE, "doStore /M", "#4 a store dirties the line"),
    _l1(L1State.F, EventKind.RETRY, "sendGETX /IM", "#5 data after re-issue must be consumed"),
    _l1(L1State.F, EventKind.COMPLETE, "sendGETX /IM", "#5 data after re-issue must be consumed"),
]


def _normalize_aliases(table_name, table) -> List[Override]:
    """Cells whose literal action spelling is an alias of another action"""
    out = []
    for (state, event), cell in table.items():
        if any(a in ACTION_ALIASES for a in cell.actions):
            fixed = TransitionSpec(tuple(a.canonical for a in cell.actions), cell.next, cell.marker)
            names = ", ".join(f"{a} -> {a.canonical}" for a in cell.actions if a in ACTION_ALIASES)
            out.append(Override(table_name, state, event, fixed, f"alias {names}"))
    return out


ALIAS_OVERRIDES: List[Override] = _normalize_aliases("L1", L1_TABLE) + _normalize_aliases("L2", L2_TABLE)

_ERRATA_L1 = {(o.state, o.event): o.cell for o in OVERRIDES + ALIAS_OVERRIDES if o.table == "L1"}
_ERRATA_L2 = {(o.state, o.event): o.cell for o in OVERRIDES + ALIAS_OVERRIDES if o.table == "L2"}


# ==================== LOOKUP ====================

def l1_table_lookup(state: L1State, event: EventKind, mode: TableMode = TableMode.ERRATA) -> TransitionSpec:
    """Cell of the L1 table for (state, event)"""
    if event not in L1_EVENTS:
        raise ValueError(f"{event} is not an L1 event")
    if mode is TableMode.ERRATA and (state, event) in _ERRATA_L1:
        return _ERRATA_L1[(state, event)]
    return L1_TABLE[(state, event)]


def l2_table_lookup(state: L2State, event: EventKind, mode: TableMode = TableMode.ERRATA) -> TransitionSpec:
    """Cell of the L2 table for (state, event)"""
    if event not in L2_EVENTS:
        raise ValueError(f"{event} is not an L2 event")
    if mode is TableMode.ERRATA and (state, event) in _ERRATA_L2:
        return _ERRATA_L2[(state, event)]
    return L2_TABLE[(state, event)]


# ==================== DUMP ====================

def dump_cell(table: str, state, event, cell: TransitionSpec) -> str:
    return f"{table},{state.value},{event.value} → {cell.render()}"


def dump_tables(mode: TableMode = TableMode.STRICT, which: str = "both") -> List[str]:
    """One line per cell, rows in table order"""
    lines = []
    if which in ("both", "L1"):
        for state in L1State:
            for event in L1_EVENTS:
                lines.append(dump_cell("L1", state, event, l1_table_lookup(state, event, mode)))
    if which in ("both", "L2"):
        for state in L2State:
            for event in L2_EVENTS:
                lines.append(dump_cell("L2", state, event, l2_table_lookup(state, event, mode)))
    return lines


def parse_dump_line(line: str):
    """Inverse of dump_cell: returns (table, state, event, cell)"""
    head, _, cell_text = line.partition("→")
    table, state_name, event_name = (p.strip() for p in head.split(","))
    states = L1State if table == "L1" else L2State
    return table, states(state_name), EventKind(event_name), TransitionSpec.parse(cell_text, states)


# ==================== VALIDATION ====================

@dataclass
class CellDiff:
    table: str
    state: object
    event: EventKind
    strict: TransitionSpec
    errata: TransitionSpec
    reason: str


@dataclass
class ValidationReport:
    l1_defined: int = 0
    l2_defined: int = 0
    missing: List[str] = field(default_factory=list)
    errata_diff: List[CellDiff] = field(default_factory=list)
    unreachable: List[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing

    @property
    def override_cells(self) -> List[CellDiff]:
        return [d for d in self.errata_diff if not d.reason.startswith("alias")]

    @property
    def alias_cells(self) -> List[CellDiff]:
        return [d for d in self.errata_diff if d.reason.startswith("alias")]


def pending_store_states(mode: TableMode = TableMode.ERRATA) -> set:
    """
    L1 states in which a line can sit with an issued, unfinished store.

    Fixpoint over the table: a store is issued by a Store cell that sends
    GETX, survives every transition that does not execute doStore, and
    finishes at once when the line reaches E or M.
    """
    finishing = {L1State.E, L1State.M}
    pending = set()
    work = []
    for state in L1State:
        cell = l1_table_lookup(state, EventKind.STORE, mode)
        if cell.is_normal and ActionKind.SEND_GETX in cell.actions:
            work.append(cell.next or state)
    while work:
        state = work.pop()
        if state in pending or state in finishing:
            continue
        pending.add(state)
        for event in L1_EVENTS:
            # an I line re-requests through its Store cell
            if event is EventKind.LOAD or (event is EventKind.STORE and state is not L1State.I):
                continue
            cell = l1_table_lookup(state, event, mode)
            if cell.is_normal and ActionKind.DO_STORE not in cell.actions:
                work.append(cell.next or state)
    return pending


def validate_tables(mode: TableMode = TableMode.ERRATA) -> ValidationReport:
    """Completeness, errata delta and classification reachability; never raises"""
    report = ValidationReport()
    for state in L1State:
        for event in L1_EVENTS:
            if (state, event) in L1_TABLE:
                report.l1_defined += 1
            else:
                report.missing.append(f"L1,{state.value},{event.value}")
    for state in L2State:
        for event in L2_EVENTS:
            if (state, event) in L2_TABLE:
                report.l2_defined += 1
            else:
                report.missing.append(f"L2,{state.value},{event.value}")

    reasons = {(o.table, o.state, o.event): o.reason for o in OVERRIDES + ALIAS_OVERRIDES}
    for state in L1State:
        for event in L1_EVENTS:
            strict = l1_table_lookup(state, event, TableMode.STRICT)
            errata = l1_table_lookup(state, event, TableMode.ERRATA)
            if strict != errata:
                report.errata_diff.append(CellDiff("L1", state, event, strict, errata,
                                                   reasons.get(("L1", state, event), "unlisted")))
    for state in L2State:
        for event in L2_EVENTS:
            strict = l2_table_lookup(state, event, TableMode.STRICT)
            errata = l2_table_lookup(state, event, TableMode.ERRATA)
            if strict != errata:
                report.errata_diff.append(CellDiff("L2", state, event, strict, errata,
                                                   reasons.get(("L2", state, event), "unlisted")))

    # FreezeGETX is only classified on a line with a pending GETX
    pending = pending_store_states(mode)
    for state in L1State:
        if state not in pending:
            report.unreachable.append(f"L1,{state.value},{EventKind.FREEZE_GETX.value}")
    return report
