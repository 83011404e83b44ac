"""
Safety checks over system snapshots and the value oracle over completed
operations. Every check is read-only and returns a Verdict.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from lockesim.core.protocol import (
    Message, NodeId, NodeKind, OpKind, TokenBundle,
)


@dataclass(frozen=True)
class LineView:
    node: NodeId
    addr: int
    state: str                      # "MEM" for memory holdings
    data: Optional[int]
    tokens: TokenBundle
    pending_acks: int = 0

    @property
    def holds_tokens(self) -> bool:
        return self.tokens.count > 0


@dataclass(frozen=True)
class SystemSnapshot:
    step: int
    total_tokens: int
    lines: Tuple[LineView, ...] = ()
    in_flight: Tuple[Message, ...] = ()

    def lines_for(self, addr: int) -> List[LineView]:
        return [v for v in self.lines if v.addr == addr]

    def messages_for(self, addr: int) -> List[Message]:
        return [m for m in self.in_flight if m.addr == addr]

    def addresses(self) -> List[int]:
        return sorted({v.addr for v in self.lines} | {m.addr for m in self.in_flight})

    def render(self, addr: Optional[int] = None) -> str:
        rows = [f"snapshot at step {self.step} (T={self.total_tokens})"]
        for v in sorted(self.lines, key=lambda v: (v.addr, v.node)):
            if addr is not None and v.addr != addr:
                continue
            value = "-" if v.data is None else str(v.data)
            rows.append(f"  a={v.addr:<3} {str(v.node):<5} {v.state:<3} tok={str(v.tokens):<7} "
                        f"val={value:<4} acks={v.pending_acks}")
        for m in self.in_flight:
            if addr is None or m.addr == addr:
                rows.append(f"  in flight {m}")
        return "\n".join(rows)


@dataclass(frozen=True)
class OpRecord:
    node: int
    kind: OpKind
    addr: int
    value: Optional[int]
    issue: int
    completion: Optional[int] = None

    def __str__(self):
        done = "pending" if self.completion is None else f"done@{self.completion}"
        return f"cpu{self.node} {self.kind.value} a={self.addr} v={self.value} issued@{self.issue} {done}"


@dataclass(frozen=True)
class Verdict:
    check: str
    passed: bool
    addr: Optional[int] = None
    step: Optional[int] = None
    detail: str = ""

    def __bool__(self):
        return self.passed

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        where = f" a={self.addr}" if self.addr is not None else ""
        when = f" step {self.step}" if self.step is not None else ""
        text = f"{self.check}: {status}{where}{when}"
        return f"{text} ({self.detail})" if self.detail else text


@dataclass
class ViolationReport:
    verdict: Verdict
    snapshot: Optional[SystemSnapshot] = None
    excerpt: List[str] = field(default_factory=list)

    def render(self) -> str:
        parts = [f"VIOLATION {self.verdict}"]
        if self.snapshot is not None:
            parts.append(self.snapshot.render(self.verdict.addr))
        if self.excerpt:
            parts.append("recent log:")
            parts.extend(f"  {line}" for line in self.excerpt)
        return "\n".join(parts)


def _pass(check, addr, step):
    return Verdict(check, True, addr, step)


def _fail(check, addr, step, detail):
    return Verdict(check, False, addr, step, detail)


# ==================== SAFETY ====================

def check_conservation(s: SystemSnapshot, addr: int) -> Verdict:
    """Held plus in-flight tokens add up to T with exactly one owner"""
    count = owners = 0
    for v in s.lines_for(addr):
        count += v.tokens.count
        owners += int(v.tokens.owner)
    for m in s.messages_for(addr):
        if m.payload is not None:
            count += m.payload.count
            owners += int(m.payload.owner)
    if count != s.total_tokens or owners != 1:
        return _fail("conservation", addr, s.step,
                     f"{count} tokens and {owners} owner(s) for T={s.total_tokens}")
    return _pass("conservation", addr, s.step)


EXCLUSIVE_STATES = {NodeKind.L1: {"M", "E"}, NodeKind.L2: {"M"}}


def check_exclusivity(s: SystemSnapshot, addr: int) -> Verdict:
    lines = s.lines_for(addr)
    owners = [v for v in lines if v.tokens.owner]
    if len(owners) > 1:
        return _fail("exclusivity", addr, s.step,
                     "owner held by " + ", ".join(str(v.node) for v in owners))
    for v in lines:
        if v.state not in EXCLUSIVE_STATES.get(v.node.kind, ()):
            continue
        if v.tokens.count != s.total_tokens or not v.tokens.owner:
            return _fail("exclusivity", addr, s.step, f"{v.node} in {v.state} holds only {v.tokens}")
        others = [o for o in lines if o.node != v.node and o.holds_tokens]
        if others:
            return _fail("exclusivity", addr, s.step,
                         f"{v.node} in {v.state} while {others[0].node} holds {others[0].tokens}")
    return _pass("exclusivity", addr, s.step)


def check_value_coherence(s: SystemSnapshot, addr: int) -> Verdict:
    """Every valid copy backed by a token carries the same value"""
    copies = [(str(v.node), v.data) for v in s.lines_for(addr) if v.holds_tokens and v.data is not None]
    copies += [(f"#{m.seq}", m.data) for m in s.messages_for(addr)
               if m.payload is not None and m.data is not None]
    values = {value for _, value in copies}
    if len(values) > 1:
        listing = ", ".join(f"{where}={value}" for where, value in copies)
        return _fail("value-coherence", addr, s.step, f"divergent copies: {listing}")
    return _pass("value-coherence", addr, s.step)


def check_line_invariants(s: SystemSnapshot, addr: int) -> Verdict:
    """State legends of both controllers"""
    T = s.total_tokens
    for v in s.lines_for(addr):
        kind, state, tok = v.node.kind, v.state, v.tokens
        problem = None
        if kind is NodeKind.L1:
            if state in ("S", "O") and (tok.count < 1 or v.data is None):
                problem = "needs a token and valid data"
            elif state == "O" and not tok.owner:
                problem = "needs the owner token"
            elif state in ("E", "M") and (tok.count != T or not tok.owner or v.data is None):
                problem = "needs every token and valid data"
            elif state == "I" and tok.count:
                problem = "holds tokens"
        elif kind is NodeKind.L2:
            if state == "A" and (tok.count < 1 or v.data is not None):
                problem = "needs tokens and no data"
            elif state == "S" and (tok.count < 1 or v.data is None or tok.owner):
                problem = "needs non-owner tokens and valid data"
            elif state == "O" and (not tok.owner or v.data is None):
                problem = "needs the owner token and valid data"
            elif state == "M" and (tok.count != T or not tok.owner):
                problem = "needs every token"
            elif state == "I" and tok.count:
                problem = "holds tokens"
        if problem:
            return _fail("line-invariants", addr, s.step, f"{v.node} {state} {tok}: {problem}")
    return _pass("line-invariants", addr, s.step)


SAFETY_CHECKS = (check_conservation, check_exclusivity, check_value_coherence, check_line_invariants)


def check_all(s: SystemSnapshot, addr: int) -> Optional[Verdict]:
    """First failing safety check, or None"""
    for check in SAFETY_CHECKS:
        verdict = check(s, addr)
        if not verdict:
            return verdict
    return None


# ==================== HISTORY ====================

def check_serialization(history: Sequence[OpRecord], addr: int, initial_value: int = 0) -> Verdict:
    """
    Stores are ordered by completion. A load may return the value current
    when it was issued or that of any store completing before it finished.
    """
    ops = [r for r in history if r.addr == addr and r.completion is not None]
    stores = sorted((r for r in ops if r.kind is OpKind.STORE), key=lambda r: r.completion)
    loads = sorted((r for r in ops if r.kind is OpKind.LOAD), key=lambda r: (r.completion, r.issue, r.node))

    def value_at(t: int) -> int:
        value = initial_value
        for st in stores:
            if st.completion > t:
                break
            value = st.value
        return value

    for load in loads:
        legal = {value_at(load.issue)}
        legal.update(st.value for st in stores if load.issue < st.completion <= load.completion)
        if load.value not in legal:
            return _fail("serialization", addr, load.completion,
                         f"{load} returned {load.value}, legal {sorted(legal)}")
    return _pass("serialization", addr, None)


def check_progress(pending: Iterable[OpRecord], now: int, bound: int,
                   history: Optional[Dict[int, List[str]]] = None) -> Verdict:
    """Every pending op is younger than `bound` steps"""
    for op in pending:
        if now - op.issue > bound:
            detail = f"{op} still pending after {now - op.issue} steps"
            if history and history.get(op.node):
                detail += "\n" + "\n".join(f"    {line}" for line in history[op.node])
            return _fail("progress", op.addr, now, detail)
    return _pass("progress", None, now)
