"""
Event loop that wires the L1 controllers, the L2, memory and the interconnect
together. Every step is one schedule choice (issue, deliver, reissue or
writeback); the safety checks run after each of them.
"""
import copy
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Deque, Dict, List, Optional, Sequence, Set, Tuple

from lockesim.config import LOG_EXCERPT, SimConfig
from lockesim.core.effects import Completion, Effects, ProcessorOp, TraceRecord
from lockesim.core.errors import ProtocolError, ProtocolFault, ScheduleError
from lockesim.core.l1_controller import L1Controller
from lockesim.core.l2_controller import L2Controller
from lockesim.core.memory import MemoryEndpoint
from lockesim.core.protocol import MEMORY_NODE, Message, MessageKind, NodeKind, Priority, l1_node
from lockesim.services.checker import (
    LineView, OpRecord, SystemSnapshot, Verdict, ViolationReport,
    check_all, check_progress, check_serialization,
)
from lockesim.services.interconnect import DeliveryPolicy, NetworkState
from lockesim.services.workload import Fence, TraceItem, TraceOp, WritebackDirective

logger = logging.getLogger(__name__)

CHOICE_KINDS = ("issue", "deliver", "reissue", "writeback")
CHECK_NAMES = ("conservation", "exclusivity", "value-coherence", "line-invariants", "serialization", "progress")


# ==================== SCHEDULES ====================

@dataclass(frozen=True)
class Choice:
    kind: str
    arg: str

    def __str__(self):
        return f"{self.kind} {self.arg}"

    @classmethod
    def parse(cls, text: str) -> "Choice":
        kind, _, arg = text.strip().partition(" ")
        if kind not in CHOICE_KINDS or not arg.strip():
            raise ScheduleError(f"bad schedule line '{text.strip()}'")
        return cls(kind, arg.strip())


def parse_schedule(text: str) -> List[Choice]:
    """One choice per line; lines starting with '#' are comments (node names contain '#')"""
    choices = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            choices.append(Choice.parse(line))
        except ScheduleError as e:
            raise ScheduleError(f"{e} at line {line_no}") from None
    return choices


def render_schedule(choices: Sequence[Choice]) -> str:
    return "".join(f"{c}\n" for c in choices)


# ==================== REPORT ====================

@dataclass
class RunReport:
    mode: str
    policy: str
    seed: int
    steps: int
    ops: int
    completed: int
    messages: Dict[str, int]
    retries: int
    freezes: int
    reissues: int
    memory_image: Dict[int, Optional[int]]
    verdicts: List[Verdict] = field(default_factory=list)
    violation: Optional[ViolationReport] = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.violation is None and self.completed == self.ops

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    @property
    def total_messages(self) -> int:
        return sum(self.messages.values())

    def render(self) -> str:
        """Stable text form; identical runs render byte-identically"""
        lines = [
            f"run mode={self.mode} policy={self.policy} seed={self.seed}",
            f"steps {self.steps}  ops {self.completed}/{self.ops} completed",
            "messages " + (" ".join(f"{k}={v}" for k, v in self.messages.items()) or "none"),
            f"retries {self.retries}  freezes {self.freezes}  reissues {self.reissues}",
            "memory " + (" ".join(f"a={a}:{'-' if v is None else v}" for a, v in self.memory_image.items()) or "none"),
            "verdicts",
        ]
        lines.extend(f"  {v}" for v in self.verdicts)
        if self.note:
            lines.append(f"note {self.note}")
        lines.append(f"result {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


# ==================== SYSTEM ====================

class System:
    def __init__(self, config: SimConfig, items: Sequence[TraceItem] = (), record_log: bool = True):
        self.config = config
        self.items = list(items)
        self.l1s = [L1Controller(i, config) for i in range(config.n_l1)]
        self.l2 = L2Controller(config)
        self.memory = MemoryEndpoint()
        self.network = NetworkState(DeliveryPolicy(config.policy), config.seed, config.fold_requests)

        self.step = 0
        self.issued_count = 0           # birth of the next processor op
        self.done = [isinstance(item, Fence) for item in self.items]
        self.done_prefix = 0
        self.barrier: List[int] = []    # index of the last FENCE before each item
        self.queues: Dict[int, Deque[int]] = {cpu: deque() for cpu in range(config.n_l1)}
        self.writebacks: Deque[int] = deque()
        last_fence = -1
        for i, item in enumerate(self.items):
            self.barrier.append(last_fence)
            if isinstance(item, Fence):
                last_fence = i
            elif isinstance(item, WritebackDirective):
                self.writebacks.append(i)
            else:
                self.queues[item.cpu].append(i)
        self._advance_prefix()

        self.outstanding: Dict[int, int] = {}       # cpu -> item index
        self.records: Dict[int, OpRecord] = {}      # item index -> op record
        self.log = [] if record_log else deque(maxlen=LOG_EXCERPT)
        self.schedule: List[Choice] = []
        self.touched: Set[int] = set()
        self.violation: Optional[ViolationReport] = None
        self.history_checked = False
        self.freezes = 0
        self.reissues = 0
        self.last_activity = 0
        self.requested_at: Dict[int, int] = {}      # cpu -> step of its last issue or reissue

    # ==================== STATUS ====================

    @property
    def finished(self) -> bool:
        """Every trace item is done"""
        return self.done_prefix == len(self.items)

    @property
    def settled(self) -> bool:
        return self.finished and self.network.quiescent

    def pending_ops(self) -> List[OpRecord]:
        return [self.records[i] for i in self.outstanding.values()]

    def history(self) -> List[OpRecord]:
        return [self.records[i] for i in sorted(self.records)]

    def _advance_prefix(self):
        while self.done_prefix < len(self.done) and self.done[self.done_prefix]:
            self.done_prefix += 1

    def _mark_done(self, index: int):
        self.done[index] = True
        self._advance_prefix()

    def _issuable(self, cpu: int) -> bool:
        queue = self.queues.get(cpu)
        if not queue or cpu in self.outstanding:
            return False
        return self.done_prefix >= self.barrier[queue[0]]

    def _writeback_ready(self) -> bool:
        return bool(self.writebacks) and self.done_prefix >= self.writebacks[0]

    def _reissuable_cpus(self) -> List[int]:
        """Cpus that may re-send their pending request now, oldest operation first.

        Any waiting request qualifies once the network is quiescent; while
        traffic is still moving only those unanswered for `reissue_timeout` steps do.
        """
        if not self.config.reissue_on_quiescence:
            return []
        lines = {l1.index: l1.reissuable() for l1 in self.l1s}
        cpus = [cpu for cpu, line in lines.items() if line is not None]
        if not self.network.quiescent:
            timeout = self.config.reissue_timeout
            if not timeout:
                return []
            cpus = [cpu for cpu in cpus if self.step - self.requested_at.get(cpu, 0) >= timeout]
        return sorted(cpus, key=lambda cpu: lines[cpu].pending_op.priority)

    def stimulus_choices(self) -> List[Choice]:
        choices = [Choice("issue", str(cpu)) for cpu in range(self.config.n_l1) if self._issuable(cpu)]
        if self._writeback_ready():
            choices.append(Choice("writeback", str(self.items[self.writebacks[0]].addr)))
        return choices

    def enabled_choices(self) -> List[Choice]:
        """Every choice the next step may take, in a stable order"""
        choices = self.stimulus_choices()
        choices.extend(Choice("deliver", d) for d in self.network.descriptors())
        choices.extend(Choice("reissue", str(cpu)) for cpu in self._reissuable_cpus())
        return choices

    # ==================== STEPPING ====================

    def apply(self, choice: Choice, message: Optional[Message] = None) -> Optional[ViolationReport]:
        """Take one step; returns the violation it caused, if any"""
        if self.violation is not None:
            raise ScheduleError("the run has already failed")
        self.step += 1
        effects = Effects(cause=choice.kind)
        try:
            self._perform(choice, message, effects)
        except ScheduleError:
            self.step -= 1
            raise
        except (ProtocolError, ProtocolFault) as e:
            self.schedule.append(choice)
            self._absorb(effects)
            self._fail(Verdict("protocol", False, self._addr_of(choice, message), self.step, str(e)))
            return self.violation
        self.schedule.append(choice)

        try:
            self._flush(effects)
        except ProtocolFault as e:
            self._absorb(effects)
            self._fail(Verdict("protocol", False, self._addr_of(choice, message), self.step, str(e)))
            return self.violation
        addrs = self._absorb(effects)

        snapshot = self.snapshot(addrs)
        for addr in sorted(addrs):
            verdict = check_all(snapshot, addr)
            if verdict is not None:
                self._fail(verdict, snapshot)
                return self.violation
        return None

    def _addr_of(self, choice: Choice, message: Optional[Message]) -> Optional[int]:
        if message is not None:
            return message.addr
        if choice.kind == "deliver":
            for part in choice.arg.split():
                if part.startswith("a="):
                    return int(part[2:])
        if choice.kind == "writeback":
            return int(choice.arg)
        return None

    def _cpu(self, arg: str) -> int:
        try:
            cpu = int(arg)
        except ValueError:
            raise ScheduleError(f"bad cpu '{arg}'") from None
        if not 0 <= cpu < self.config.n_l1:
            raise ScheduleError(f"cpu {cpu} out of range")
        return cpu

    def _perform(self, choice: Choice, message: Optional[Message], effects: Effects):
        kind = choice.kind
        if kind == "issue":
            cpu = self._cpu(choice.arg)
            if not self._issuable(cpu):
                raise ScheduleError(f"cpu {cpu} has nothing to issue")
            index = self.queues[cpu][0]
            item = self.items[index]
            op = ProcessorOp(cpu, item.kind, item.addr, item.value, Priority(self.issued_count, cpu))
            self.issued_count += 1
            self.outstanding[cpu] = index
            self.records[index] = OpRecord(cpu, item.kind, item.addr, item.value, self.step)
            self.touched.add(item.addr)
            self.last_activity = self.step
            self.requested_at[cpu] = self.step
            logger.debug("step %d: cpu %d issues %s %s", self.step, cpu, op, op.priority)
            self.l1s[cpu].issue(op, effects)
        elif kind == "deliver":
            msg = message if message is not None else self.network.pick(choice.arg)
            self.touched.add(msg.addr)
            self._route(msg, effects)
        elif kind == "reissue":
            cpu = self._cpu(choice.arg)
            if cpu not in self._reissuable_cpus():
                raise ScheduleError(f"cpu {cpu} cannot reissue now")
            self.reissues += 1
            self.requested_at[cpu] = self.step
            self.l1s[cpu].reissue(effects)
        elif kind == "writeback":
            if not self._writeback_ready() or str(self.items[self.writebacks[0]].addr) != choice.arg:
                raise ScheduleError(f"writeback of block {choice.arg} is not due")
            index = self.writebacks.popleft()
            addr = self.items[index].addr
            self.touched.add(addr)
            self.l2.replace(addr, effects)
            self._mark_done(index)
        else:
            raise ScheduleError(f"unknown choice '{choice}'")

    def _route(self, msg: Message, effects: Effects):
        dest = msg.dest
        if dest.kind is NodeKind.L1:
            self.l1s[dest.index].receive(msg, effects)
        elif dest.kind is NodeKind.L2:
            self.l2.receive(msg, effects)
        else:
            self.memory.receive(msg, effects)

    def _flush(self, effects: Effects):
        for out in effects.outbox:
            if out.dests is None:
                self.network.send(out.message)
            elif out.delayed and self.config.backoff_delay > 0:
                self.network.send_later(out.message, out.dests, self.step + self.config.backoff_delay)
            else:
                self.network.broadcast(out.message, out.dests)
        for done in effects.completions:
            self._complete(done, effects)

    def _complete(self, done: Completion, effects: Effects):
        index = self.outstanding.pop(done.cpu, None)
        if index is None:
            raise ProtocolFault(f"cpu {done.cpu} completed {done.kind.value} a={done.addr} with nothing outstanding")
        record = self.records[index]
        if record.addr != done.addr or record.kind is not done.kind:
            raise ProtocolFault(f"cpu {done.cpu} completed {done.kind.value} a={done.addr}, expected {record}")
        self.records[index] = replace(record, value=done.value, completion=self.step)
        self.queues[done.cpu].popleft()
        self._mark_done(index)
        self.last_activity = self.step
        effects.record(TraceRecord(kind="complete", node=l1_node(done.cpu), addr=done.addr,
                                   detail=f"{done.kind.value} v={done.value}"))

    def _absorb(self, effects: Effects) -> Set[int]:
        addrs = set()
        for record in effects.records:
            record = replace(record, step=self.step)
            self.log.append(record)
            addrs.add(record.addr)
            if record.after == "F" and record.before != "F" and record.node.kind is NodeKind.L1:
                self.freezes += 1
        self.touched |= addrs
        return addrs

    def _fail(self, verdict: Verdict, snapshot: Optional[SystemSnapshot] = None):
        excerpt = [str(r) for r in list(self.log)[-LOG_EXCERPT:]]
        self.violation = ViolationReport(verdict, snapshot or self.snapshot(), excerpt)
        logger.warning("step %d: %s", self.step, verdict)

    # ==================== INSPECTION ====================

    def snapshot(self, addrs=None) -> SystemSnapshot:
        addrs = set(self.touched) if addrs is None else set(addrs)
        lines = []
        for l1 in self.l1s:
            for addr in sorted(l1.lines):
                if addr in addrs:
                    line = l1.lines[addr]
                    lines.append(LineView(l1.node, addr, str(line.state), line.data, line.tokens, line.pending_acks))
        for addr in sorted(addrs):
            line = self.l2.view(addr)
            lines.append(LineView(self.l2.node, addr, str(line.state), line.data, line.tokens, line.pending_acks))
            block = self.memory.blocks.get(addr)
            if block is not None:
                lines.append(LineView(MEMORY_NODE, addr, "MEM", block.data, block.tokens))
        in_flight = tuple(m for m in self.network.messages() if m.addr in addrs)
        return SystemSnapshot(self.step, self.config.tokens, tuple(lines), in_flight)

    def owner_value(self, addr: int) -> Optional[int]:
        """Value held with the owner token, wherever it is"""
        snapshot = self.snapshot({addr})
        for view in snapshot.lines:
            if view.tokens.owner:
                return view.data
        for msg in snapshot.in_flight:
            if msg.payload is not None and msg.payload.owner:
                return msg.data
        return None

    def clone(self) -> "System":
        """Independent copy; configuration, trace and finished records are shared"""
        twin = copy.copy(self)
        twin.l1s = [l1.clone() for l1 in self.l1s]
        twin.l2 = self.l2.clone()
        twin.memory = self.memory.clone()
        twin.network = self.network.clone()
        twin.done = list(self.done)
        twin.queues = {cpu: deque(queue) for cpu, queue in self.queues.items()}
        twin.writebacks = deque(self.writebacks)
        twin.outstanding = dict(self.outstanding)
        twin.records = dict(self.records)
        twin.log = copy.copy(self.log)
        twin.schedule = list(self.schedule)
        twin.touched = set(self.touched)
        twin.requested_at = dict(self.requested_at)
        return twin

    def canonical_key(self) -> tuple:
        """Hashable state, blind to sequence numbers, timestamps and arrival history"""
        l1s = tuple(
            (tuple(l1.lines[a].key() for a in sorted(l1.lines)), tuple(tuple(s) for s in l1.cache.lru))
            for l1 in self.l1s
        )
        l2 = tuple(
            line.key() for a, line in sorted(self.l2.lines.items())
            if line.key() != self.l2.fresh_line(a).key()
        )
        progress = (
            tuple(self.done), tuple(sorted(self.outstanding.items())), self.issued_count,
            tuple((i, r.value, r.completion is not None) for i, r in sorted(self.records.items())),
        )
        return l1s, l2, self.memory.key(), self.network.key(), progress

    def l2_replace(self, addr: int) -> Optional[ViolationReport]:
        """Make the L2 write `addr` back to memory outside of any trace"""
        self.step += 1
        effects = Effects(cause="writeback")
        try:
            self.touched.add(addr)
            self.l2.replace(addr, effects)
            self._flush(effects)
        except (ProtocolError, ProtocolFault) as e:
            self._absorb(effects)
            self._fail(Verdict("protocol", False, addr, self.step, str(e)))
            return self.violation
        addrs = self._absorb(effects) | {addr}
        snapshot = self.snapshot(addrs)
        for a in sorted(addrs):
            verdict = check_all(snapshot, a)
            if verdict is not None:
                self._fail(verdict, snapshot)
                return self.violation
        return None

    # ==================== RUNNING ====================

    def run(self, schedule: Optional[Sequence[Choice]] = None) -> RunReport:
        """Run to completion (or to the end of `schedule`) and check the history"""
        logger.info("run: %d trace items, mode=%s policy=%s seed=%d",
                    len(self.items), self.config.mode.value, self.config.policy, self.config.seed)
        note = ""
        if schedule is not None:
            for choice in schedule:
                if self.apply(choice) is not None:
                    break
            if self.violation is None and not self.finished:
                note = "schedule ended with operations outstanding"
        elif self.network.policy is DeliveryPolicy.ADVERSARIAL:
            raise ScheduleError("the adversarial policy needs a schedule")
        else:
            self._run_free()
        if self.violation is None and self.finished:
            self.check_history()
        return self.report(note)

    def _run_free(self):
        bound = self.config.progress_bound
        while self.violation is None:
            self.network.release_due(self.step)
            for choice in self.stimulus_choices():
                if self.apply(choice) is not None:
                    return
            overdue = [] if self.network.quiescent else self._reissuable_cpus()
            if overdue:
                if self.apply(Choice("reissue", str(overdue[0]))) is not None:
                    return
            elif self.network.in_flight:
                msg = self.network.step()
                if self.apply(Choice("deliver", msg.descriptor()), msg) is not None:
                    return
            elif self.network.delayed:
                self.network.release_all()
                continue
            elif self.stimulus_choices():
                # an op that hit in the cache freed its cpu for the next one
                continue
            elif self.finished:
                return
            else:
                cpus = self._reissuable_cpus()
                if not cpus:
                    pending = ", ".join(str(r) for r in self.pending_ops()) or "nothing pending"
                    self._fail(Verdict("progress", False, None, self.step,
                                       f"no message in flight and nothing to reissue: {pending}"))
                    return
                if self.apply(Choice("reissue", str(cpus[0]))) is not None:
                    return
            self._check_progress(bound)

    def _check_progress(self, bound: int):
        verdict = check_progress(self.pending_ops(), self.step, bound)
        if not verdict:
            history = {}
            for op in self.pending_ops():
                node = l1_node(op.node)
                history[op.node] = [str(r) for r in self.log if r.node == node and r.addr == op.addr]
            self._fail(check_progress(self.pending_ops(), self.step, bound, history))
            return
        if not self.outstanding and self.step - self.last_activity > bound:
            self._fail(Verdict("progress", False, None, self.step,
                               f"traffic still circulating {bound} steps after the last completion"))

    def check_history(self) -> Optional[Verdict]:
        """Serialization oracle over every completed op"""
        self.history_checked = True
        history = self.history()
        for addr in sorted({r.addr for r in history}):
            verdict = check_serialization(history, addr, self.config.initial_value)
            if not verdict:
                self._fail(verdict)
                return verdict
        return None

    def report(self, note: str = "") -> RunReport:
        failed = self.violation.verdict if self.violation else None
        verdicts = []
        for name in CHECK_NAMES:
            if failed is not None and failed.check == name:
                verdicts.append(failed)
            elif name == "serialization" and not self.history_checked:
                verdicts.append(Verdict(name, True, detail="not checked"))
            else:
                verdicts.append(Verdict(name, True))
        if failed is not None and failed.check not in CHECK_NAMES:
            verdicts.append(failed)
        messages = {kind.value: count for kind, count in
                    sorted(self.network.sent_by_kind.items(), key=lambda kv: kv[0].value)}
        return RunReport(
            mode=self.config.mode.value,
            policy=self.config.policy,
            seed=self.config.seed,
            steps=self.step,
            ops=sum(1 for item in self.items if isinstance(item, TraceOp)),
            completed=sum(1 for r in self.records.values() if r.completion is not None),
            messages=messages,
            retries=self.network.count(MessageKind.RETRY),
            freezes=self.freezes,
            reissues=self.reissues,
            memory_image={addr: self.owner_value(addr) for addr in sorted(self.touched)},
            verdicts=verdicts,
            violation=self.violation,
            note=note,
        )


def run_trace(config: SimConfig, items: Sequence[TraceItem], schedule: Optional[Sequence[Choice]] = None,
              record_log: bool = True) -> Tuple[System, RunReport]:
    system = System(config, items, record_log)
    return system, system.run(schedule)
