"""
Bounded breadth-first exploration of every interleaving of a small trace.

Each node is a whole System; its successors are all enabled choices
(issue, deliver, reissue, writeback). States are merged on their canonical
key, so a violation is reported with a shortest schedule that reaches it.

The explorer always folds identical control messages in flight and turns
the reissue timeout off, so the graph of a finite trace is finite and
independent of the step clock. States where only a reissue can move the
run on are counted and the shortest schedule to one of them is kept: they
are the places a request would hang without the watchdog.
"""
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from lockesim.config import EXPLORE_DEPTH, EXPLORE_MAX_STATES, SimConfig
from lockesim.core.protocol import OpKind
from lockesim.services.checker import ViolationReport
from lockesim.services.system import Choice, System
from lockesim.services.workload import TraceItem

logger = logging.getLogger(__name__)


@dataclass
class ExploreReport:
    mode: str
    n_l1: int
    tokens: int
    max_depth: int
    max_states: int
    visited: int = 0
    transitions: int = 0
    deepest: int = 0
    terminal: int = 0
    truncated: bool = False
    reissue_states: int = 0
    reissue_only: int = 0
    first_reissue_only: List[Choice] = field(default_factory=list)
    stuck: List[List[Choice]] = field(default_factory=list)
    outcomes: Counter = field(default_factory=Counter)
    violation: Optional[ViolationReport] = None
    counterexample: List[Choice] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violation is None and not self.stuck

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def render(self) -> str:
        lines = [
            f"explore mode={self.mode} n_l1={self.n_l1} T={self.tokens} "
            f"depth<={self.max_depth} states<={self.max_states}",
            f"visited {self.visited}  transitions {self.transitions}  deepest {self.deepest}  terminal {self.terminal}",
            f"truncated {'yes' if self.truncated else 'no'}",
            f"reissue states {self.reissue_states}",
            f"reissue-only states {self.reissue_only}",
            f"stuck states {len(self.stuck)}",
        ]
        if self.outcomes:
            lines.append("outcomes")
            lines.extend(f"  {outcome} : {count}" for outcome, count in sorted(self.outcomes.items()))
        if self.stuck:
            lines.append("first stuck schedule")
            lines.extend(f"  {c}" for c in self.stuck[0])
        if self.first_reissue_only:
            lines.append("first reissue-only schedule")
            lines.extend(f"  {c}" for c in self.first_reissue_only)
        if self.violation is not None:
            lines.append(self.violation.render())
            lines.append(f"counterexample ({len(self.counterexample)} steps)")
            lines.extend(f"  {c}" for c in self.counterexample)
        lines.append(f"result {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def canonicalize(system: System) -> tuple:
    return system.canonical_key()


def _outcome(system: System) -> str:
    loads = [r for r in system.history() if r.kind is OpKind.LOAD]
    if not loads:
        return "no loads"
    return ", ".join(f"cpu{r.node} LD a={r.addr}={r.value}" for r in loads)


def _path(parents: Dict[tuple, Optional[Tuple[tuple, Choice]]], key: tuple) -> List[Choice]:
    path = []
    link = parents[key]
    while link is not None:
        key, choice = link
        path.append(choice)
        link = parents[key]
    path.reverse()
    return path


def explore(config: SimConfig, items: Sequence[TraceItem], max_depth: int = EXPLORE_DEPTH,
            max_states: int = EXPLORE_MAX_STATES,
            on_progress: Optional[Callable[[int], None]] = None) -> ExploreReport:
    """Visit every state reachable within `max_depth` choices, stopping at the first violation"""
    config = config.with_overrides(policy="adversarial", backoff_delay=0, reissue_timeout=0, fold_requests=True)
    report = ExploreReport(config.mode.value, config.n_l1, config.tokens, max_depth, max_states)

    root = System(config, items, record_log=False)
    root_key = canonicalize(root)
    parents: Dict[tuple, Optional[Tuple[tuple, Choice]]] = {root_key: None}
    frontier = deque([(root, root_key, 0)])
    logger.info("exploring %d trace items, mode=%s", len(items), config.mode.value)

    while frontier:
        system, key, depth = frontier.popleft()
        report.deepest = max(report.deepest, depth)
        choices = system.enabled_choices()
        reissues = sum(1 for c in choices if c.kind == "reissue")
        if reissues:
            report.reissue_states += 1
            if reissues == len(choices):
                report.reissue_only += 1
                if not report.first_reissue_only:
                    report.first_reissue_only = _path(parents, key)

        if not choices:
            if system.finished:
                report.terminal += 1
                if system.check_history() is not None:
                    report.violation = system.violation
                    report.counterexample = _path(parents, key)
                    break
                report.outcomes[_outcome(system)] += 1
            else:
                report.stuck.append(_path(parents, key))
            continue
        if depth >= max_depth:
            report.truncated = True
            continue

        for choice in choices:
            child = system.clone()
            report.transitions += 1
            if child.apply(choice) is not None:
                report.violation = child.violation
                report.counterexample = _path(parents, key) + [choice]
                break
            child_key = canonicalize(child)
            if child_key in parents:
                continue
            if len(parents) >= max_states:
                report.truncated = True
                continue
            parents[child_key] = (key, choice)
            frontier.append((child, child_key, depth + 1))
        if report.violation is not None:
            break
        if on_progress is not None:
            on_progress(len(parents))

    report.visited = len(parents)
    logger.info("explored %d states, %d transitions", report.visited, report.transitions)
    return report
