from dataclasses import replace

import pytest

from lockesim.config import SimConfig
from lockesim.core.errors import ScheduleError
from lockesim.core.l1_controller import L1Controller
from lockesim.core.protocol import MessageKind, TableMode, TokenBundle
from lockesim.services.checker import check_all
from lockesim.data.load_data import sample_trace
from lockesim.services.system import Choice, System, parse_schedule, render_schedule, run_trace
from lockesim.services.workload import generate_workload, parse_trace


def items(text, n_l1=2):
    return parse_trace(text, n_l1)


def test_empty_trace_does_nothing(config):
    system, report = run_trace(config, [])
    assert report.ok
    assert report.steps == 0
    assert report.total_messages == 0
    assert system.settled


def test_single_store_under_fifo(config):
    system, report = run_trace(config, items("0 ST 0 5"))
    assert report.ok, report.render()
    assert report.completed == report.ops == 1
    assert report.steps == 6
    assert report.messages == {"ACK": 1, "COMPLETE": 1, "DATA_ALL_TOKENS": 1, "GETX": 2}
    assert report.memory_image == {0: 5}
    assert system.network.quiescent


def test_fenced_load_observes_the_store(config):
    system, report = run_trace(config, items(sample_trace("fenced")))
    assert report.ok, report.render()
    [store, load] = system.history()
    assert load.value == 7
    assert load.issue > store.completion
    assert report.memory_image == {4: 7}


def test_writeback_moves_every_token_to_memory(config):
    system, report = run_trace(config, items("WB 3"))
    assert report.ok, report.render()
    assert system.memory.blocks[3].tokens == TokenBundle(2, True)
    assert report.memory_image == {3: 0}


def test_report_lists_every_check(config):
    _, report = run_trace(config, items("0 ST 0 5"))
    names = [v.check for v in report.verdicts]
    assert names == ["conservation", "exclusivity", "value-coherence", "line-invariants",
                     "serialization", "progress"]
    assert all(v.passed for v in report.verdicts)
    assert report.render().endswith("result PASS\n")


def test_same_seed_renders_identically(config):
    randomized = config.with_overrides(policy="random", seed=7, n_l1=3)
    trace = items(sample_trace("race"), n_l1=3)
    _, first = run_trace(randomized, trace)
    _, second = run_trace(randomized, trace)
    assert first.render() == second.render()


def test_recorded_schedule_replays_adversarially(config):
    trace = items(sample_trace("fenced"))
    system, report = run_trace(config, trace)
    replay_config = config.with_overrides(policy="adversarial")
    replay, replayed = run_trace(replay_config, trace, parse_schedule(render_schedule(system.schedule)))
    assert replayed.ok, replayed.render()
    assert replayed.steps == report.steps
    assert replayed.messages == report.messages
    assert [r.value for r in replay.history()] == [r.value for r in system.history()]


def test_adversarial_run_needs_a_schedule(config):
    system = System(config.with_overrides(policy="adversarial"), items("0 LD 0"))
    with pytest.raises(ScheduleError):
        system.run()


def test_partial_schedule_leaves_a_note(config):
    adversarial = config.with_overrides(policy="adversarial")
    _, report = run_trace(adversarial, items("0 LD 0"), [Choice("issue", "0")])
    assert not report.ok
    assert report.exit_code == 1
    assert report.note == "schedule ended with operations outstanding"
    assert report.verdicts[4].detail == "not checked"


def test_choices_that_are_not_enabled_are_rejected(config):
    system = System(config.with_overrides(policy="adversarial"), items("0 LD 0"))
    with pytest.raises(ScheduleError):
        system.apply(Choice("issue", "1"))
    with pytest.raises(ScheduleError):
        system.apply(Choice("deliver", "GETS a=0 L1#0->L2 org=L1#0"))
    assert system.step == 0
    assert system.enabled_choices() == [Choice("issue", "0")]


def test_schedule_text():
    text = "# header\nissue 0\n\ndeliver GETS a=0 L1#0->L2 org=L1#0 req=L1#0 pri=(0,#0)\nreissue 1\nwriteback 3\n"
    choices = parse_schedule(text)
    assert [c.kind for c in choices] == ["issue", "deliver", "reissue", "writeback"]
    assert choices[1].arg.endswith("pri=(0,#0)")
    assert render_schedule(choices) == text.replace("# header\n", "").replace("\n\n", "\n")
    with pytest.raises(ScheduleError) as err:
        parse_schedule("issue 0\njump 3\n")
    assert "at line 2" in str(err.value)


def test_canonical_key_tracks_progress(config):
    adversarial = config.with_overrides(policy="adversarial")
    a = System(adversarial, items("0 LD 0"))
    b = System(adversarial, items("0 LD 0"))
    assert a.canonical_key() == b.canonical_key()
    a.apply(Choice("issue", "0"))
    assert a.canonical_key() != b.canonical_key()


def test_strict_tables_run_in_the_same_loop(config):
    strict = config.with_overrides(mode=TableMode.STRICT)
    _, report = run_trace(strict, items("0 LD 0"))
    assert report.mode == "strict"
    assert report.steps > 0


def test_back_to_back_hits_on_one_cpu(config):
    _, report = run_trace(config, items("0 LD 0\n0 LD 0\n0 ST 0 38\n0 ST 0 230"))
    assert report.ok, report.render()
    assert report.completed == 4
    assert report.memory_image == {0: 230}


def test_two_writers_race_under_random_delivery(config):
    trace = items(sample_trace("race"))
    for seed in range(10):
        _, report = run_trace(config.with_overrides(policy="random", seed=seed), trace)
        assert report.ok, report.render()
        assert report.completed == report.ops == 4


def test_older_writer_freezes_the_younger_one(config):
    system = System(config.with_overrides(policy="adversarial"), items("0 ST 0 1\n1 ST 0 2"))
    system.apply(Choice("issue", "0"))
    system.apply(Choice("issue", "1"))
    [to_younger] = [c for c in system.enabled_choices() if c.arg.startswith("GETX a=0 L1#0->L1#1")]
    assert system.apply(to_younger) is None
    assert system.freezes == 1

    for _ in range(500):
        choices = system.enabled_choices()
        if not choices:
            break
        assert system.apply(choices[0]) is None
    assert system.finished
    assert system.check_history() is None
    last_store = max(system.history(), key=lambda r: r.completion)
    assert system.owner_value(0) == last_store.value


def test_oldest_request_reissues_first(config):
    system = System(config.with_overrides(policy="adversarial", reissue_timeout=1), items("1 LD 0\n0 LD 1"))
    system.apply(Choice("issue", "1"))
    system.apply(Choice("issue", "0"))
    [ignored] = [c for c in system.enabled_choices() if c.arg.startswith("GETS a=0 L1#1->L1#0")]
    system.apply(ignored)

    reissues = [c for c in system.enabled_choices() if c.kind == "reissue"]
    assert reissues == [Choice("reissue", "1"), Choice("reissue", "0")]


def test_no_reissue_under_traffic_without_a_timeout(config):
    system = System(config.with_overrides(policy="adversarial", reissue_timeout=0), items("0 LD 0"))
    system.apply(Choice("issue", "0"))
    system.step += 500
    assert all(c.kind == "deliver" for c in system.enabled_choices())


def test_clone_runs_on_independently(config):
    system = System(config.with_overrides(policy="adversarial"), items("0 ST 0 1"))
    system.apply(Choice("issue", "0"))
    before = system.canonical_key()
    twin = system.clone()
    twin.apply(twin.enabled_choices()[0])

    assert system.step == 1
    assert twin.step == 2
    assert system.canonical_key() == before
    assert twin.canonical_key() != before
    assert len(system.schedule) == 1


def test_corrupted_copy_breaks_value_coherence(config):
    system, report = run_trace(config, items(sample_trace("fenced")))
    assert report.ok
    holders = [line for l1 in system.l1s for line in l1.lines.values()
               if not line.tokens.empty and line.data is not None]
    holders[0].data += 1
    verdict = check_all(system.snapshot(), 4)
    assert verdict is not None
    assert verdict.check == "value-coherence"


def test_stale_load_breaks_serialization(config):
    system, report = run_trace(config, items(sample_trace("fenced")))
    assert report.ok
    load = system.records[2]
    system.records[2] = replace(load, value=load.value + 1)
    verdict = system.check_history()
    assert verdict is not None
    assert verdict.check == "serialization"


def test_owner_data_dropped_on_arrival_is_caught(monkeypatch):
    update = L1Controller._update

    def keep_stale_copy(self, line, firing, effects):
        msg = firing.stimulus
        if msg.kind is not MessageKind.DATA_OWNER:
            return update(self, line, firing, effects)
        line.tokens = line.tokens.merge(msg.payload)
        if line.data is None:
            line.data = self.config.initial_value

    monkeypatch.setattr(L1Controller, "_update", keep_stale_copy)
    cfg = SimConfig(n_l1=4).validate()
    caught = set()
    for seed in range(6):
        _, report = run_trace(cfg.with_overrides(seed=seed), generate_workload(400, seed, 4), record_log=False)
        if report.violation is not None:
            caught.add(report.violation.verdict.check)
    assert caught & {"value-coherence", "serialization"}


def test_younger_low_cpu_does_not_starve_an_older_writer():
    cfg = SimConfig(n_l1=3, mode=TableMode.ERRATA, policy="random", seed=60).validate()
    trace = items("1 LD 0\n1 LD 0\n1 LD 0\n0 LD 0\n0 ST 0 122\n2 ST 0 85", n_l1=3)
    _, report = run_trace(cfg, trace)
    assert report.ok, report.render()
    assert report.completed == 6
