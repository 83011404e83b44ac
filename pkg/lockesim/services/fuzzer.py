"""
Seeded random workloads run side by side. Each seed gets its own System,
so seeds share nothing and can run on a thread pool.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import pandas as pd

from lockesim.config import DEFAULT_WORKERS, FUZZ_BLOCKS, SimConfig
from lockesim.services.artifacts import save_failure
from lockesim.services.system import System, render_schedule
from lockesim.services.workload import generate_workload, render_trace

logger = logging.getLogger(__name__)

COLUMNS = ["seed", "ok", "ops", "completed", "steps", "messages", "retries", "freezes",
           "reissues", "check", "detail", "artifact"]


@dataclass
class FuzzSummary:
    n_ops: int
    seeds: int
    results: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=COLUMNS))

    @property
    def failures(self) -> pd.DataFrame:
        if self.results.empty:
            return self.results
        return self.results[~self.results["ok"].astype(bool)]

    @property
    def ok(self) -> bool:
        return bool(self.results["ok"].all()) if not self.results.empty else True

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def render(self) -> str:
        df = self.results
        lines = [f"fuzz {self.seeds} seed(s) x {self.n_ops} ops"]
        if not df.empty:
            lines.append(f"passed {int(df['ok'].sum())}/{len(df)}")
            lines.append(f"steps total {int(df['steps'].sum())}  messages total {int(df['messages'].sum())}")
            lines.append(f"retries total {int(df['retries'].sum())}  freezes total {int(df['freezes'].sum())}")
        for row in self.failures.itertuples():
            lines.append(f"  seed {row.seed}: {row.check} {row.detail.splitlines()[0] if row.detail else ''}".rstrip())
        lines.append(f"result {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def run_seed(config: SimConfig, n_ops: int, seed: int, blocks: int = FUZZ_BLOCKS,
             artifact_dir=None) -> Dict:
    """One seed: generate, run, and persist the replay files if it failed"""
    seeded = config.with_overrides(seed=seed)
    items = generate_workload(n_ops, seed, seeded.n_l1, blocks)
    system = System(seeded, items, record_log=False)
    report = system.run()
    row = {
        "seed": seed,
        "ok": report.ok,
        "ops": report.ops,
        "completed": report.completed,
        "steps": report.steps,
        "messages": report.total_messages,
        "retries": report.retries,
        "freezes": report.freezes,
        "reissues": report.reissues,
        "check": "",
        "detail": "",
        "artifact": "",
    }
    if not report.ok:
        if report.violation is not None:
            row["check"] = report.violation.verdict.check
            row["detail"] = report.violation.verdict.detail
            text = report.render() + report.violation.render() + "\n"
        else:
            row["check"] = "incomplete"
            text = report.render()
        paths = save_failure(f"fuzz-seed-{seed}", render_trace(items), render_schedule(system.schedule),
                             text, artifact_dir)
        row["artifact"] = str(paths["trace"])
        logger.warning("seed %d failed (%s); replay files in %s", seed, row["check"], paths["trace"].parent)
    return row


def fuzz(config: SimConfig, n_ops: int, seeds: List[int], workers: Optional[int] = None,
         blocks: int = FUZZ_BLOCKS, artifact_dir=None,
         on_result: Optional[Callable[[Dict], None]] = None) -> FuzzSummary:
    """Run every seed and gather one row per seed, ordered by seed"""
    if not seeds:
        return FuzzSummary(n_ops, 0)
    max_workers = min(workers or os.cpu_count() or DEFAULT_WORKERS, len(seeds))
    rows = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_seed = {
            executor.submit(run_seed, config, n_ops, seed, blocks, artifact_dir): seed
            for seed in seeds
        }
        for future in as_completed(future_to_seed):
            row = future.result()
            rows.append(row)
            if on_result is not None:
                on_result(row)
    df = pd.DataFrame(rows, columns=COLUMNS).sort_values("seed").reset_index(drop=True)
    return FuzzSummary(n_ops, len(seeds), df)


def export_csv(summary: FuzzSummary, path) -> None:
    summary.results.to_csv(path, index=False)
