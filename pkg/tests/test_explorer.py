from lockesim.config import EXPLORE_MAX_STATES, SimConfig
from lockesim.core.protocol import TableMode
from lockesim.services.explorer import explore
from lockesim.services.system import Choice, System
from lockesim.services.workload import parse_trace


def test_nothing_to_do_is_a_single_state(config):
    report = explore(config, [], max_depth=10, max_states=100)
    assert report.visited == 1
    assert report.terminal == 1
    assert report.ok
    assert report.outcomes == {"no loads": 1}


def test_single_load_state_space(config):
    report = explore(config, parse_trace("0 LD 0", 2), max_depth=20, max_states=1000)
    assert report.ok, report.render()
    assert report.visited == 9
    assert report.terminal == 1
    assert not report.truncated
    assert report.stuck == []
    assert report.reissue_only == 0
    assert report.outcomes == {"cpu0 LD a=0=0": 1}


def test_depth_budget_truncates(config):
    report = explore(config, parse_trace("0 LD 0", 2), max_depth=2, max_states=1000)
    assert report.truncated
    assert report.terminal == 0
    assert report.violation is None


def test_state_budget_truncates(config):
    report = explore(config, parse_trace("0 LD 0", 2), max_depth=20, max_states=3)
    assert report.truncated
    assert report.visited == 3


def test_strict_tables_yield_a_replayable_counterexample(config):
    strict = config.with_overrides(mode=TableMode.STRICT)
    trace = parse_trace("0 ST 0 1", 2)
    report = explore(strict, trace, max_depth=20, max_states=10_000)
    assert report.violation is not None
    assert report.counterexample
    assert report.exit_code == 1

    replay = System(strict.with_overrides(policy="adversarial", backoff_delay=0), trace)
    replayed = replay.run(report.counterexample)
    assert replayed.violation is not None
    assert replayed.violation.verdict.check == report.violation.verdict.check
    assert replay.step == len(report.counterexample)


def test_progress_callback_sees_growing_state_count(config):
    seen = []
    explore(config, parse_trace("0 LD 0", 2), max_depth=20, max_states=1000, on_progress=seen.append)
    assert seen
    assert seen == sorted(seen)
    assert seen[-1] == 9


def test_single_store_state_space(config):
    report = explore(config, parse_trace("0 ST 0 1", 2), max_depth=20, max_states=1000)
    assert report.ok, report.render()
    assert report.visited == 13
    assert report.terminal == 1
    assert not report.truncated
    assert report.outcomes == {"no loads": 1}


def test_racing_stores_are_covered_exhaustively():
    cfg = SimConfig(n_l1=2, tokens=3, mode=TableMode.ERRATA).validate()
    report = explore(cfg, parse_trace("0 ST 0 1\n1 ST 0 0", 2), max_depth=100, max_states=EXPLORE_MAX_STATES)
    assert report.ok, report.render()
    assert not report.truncated
    assert report.stuck == []
    assert report.terminal > 0
    assert report.deepest >= 12
    assert report.outcomes == {"no loads": report.terminal}


def test_strict_owner_ack_loses_the_tokens(config):
    strict = config.with_overrides(mode=TableMode.STRICT)
    report = explore(strict, parse_trace("0 ST 0 1", 2), max_depth=20, max_states=10_000)
    assert report.violation.verdict.check == "conservation"
    assert len(report.counterexample) == 5
    assert report.counterexample[0] == Choice("issue", "0")
    assert report.counterexample[-1].arg.startswith("ACK a=0 L2->L2")
    assert any("PO→I Ack" in line for line in report.violation.excerpt)
