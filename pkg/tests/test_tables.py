import pytest

from lockesim.core.protocol import ActionKind, EventKind, L1State, L2State, Marker, TableMode
from lockesim.core.tables import (
    ALIAS_OVERRIDES, OVERRIDES, dump_tables, l1_table_lookup, l2_table_lookup,
    parse_dump_line, pending_store_states, validate_tables,
)
from lockesim.data.load_data import load_golden_cells, load_golden_dump

L1_GOLDEN = load_golden_cells("L1")
L2_GOLDEN = load_golden_cells("L2")


def _cell_id(entry):
    table, state, event, _ = entry
    return f"{table}-{state.value}-{event.value}"


@pytest.mark.parametrize("entry", L1_GOLDEN, ids=_cell_id)
def test_l1_strict_cell_matches_golden(entry):
    _, state, event, expected = entry
    assert l1_table_lookup(state, event, TableMode.STRICT) == expected


@pytest.mark.parametrize("entry", L2_GOLDEN, ids=_cell_id)
def test_l2_strict_cell_matches_golden(entry):
    _, state, event, expected = entry
    assert l2_table_lookup(state, event, TableMode.STRICT) == expected


def test_golden_dumps_cover_every_cell():
    assert len(L1_GOLDEN) == 12 * 14
    assert len(L2_GOLDEN) == 9 * 10


def test_strict_dump_is_the_golden_text():
    assert dump_tables(TableMode.STRICT, "L1") == load_golden_dump("L1")
    assert dump_tables(TableMode.STRICT, "L2") == load_golden_dump("L2")


def test_dump_line_parses_back():
    line = "L1,O,Gets → send1Token /PO"
    table, state, event, cell = parse_dump_line(line)
    assert (table, state, event) == ("L1", L1State.O, EventKind.GETS)
    assert cell.actions == (ActionKind.SEND_1_TOKEN,)
    assert cell.next is L1State.PO


def test_marker_cells():
    assert l1_table_lookup(L1State.IS, EventKind.STORE).marker is Marker.STALL
    assert l1_table_lookup(L1State.I, EventKind.GETS).marker is Marker.IGNORE
    assert l1_table_lookup(L1State.E, EventKind.DATA_SHARED).marker is Marker.ERROR
    assert l2_table_lookup(L2State.I, EventKind.REPLACEMENT).marker is Marker.ERROR


def test_lookup_rejects_foreign_events():
    with pytest.raises(ValueError):
        l1_table_lookup(L1State.I, EventKind.TOKENS)
    with pytest.raises(ValueError):
        l2_table_lookup(L2State.I, EventKind.LOAD)


def test_errata_delta_is_overrides_plus_aliases():
    report = validate_tables(TableMode.ERRATA)
    assert report.complete
    assert report.l1_defined == 168
    assert report.l2_defined == 90
    assert len(report.override_cells) == len(OVERRIDES) == 8
    assert len(report.alias_cells) == len(ALIAS_OVERRIDES) == 3
    assert all(d.reason != "unlisted" for d in report.errata_diff)


@pytest.mark.parametrize("state, event, strict_next, errata_next", [
    (L1State.I, EventKind.LOAD, None, L1State.IS),
    (L1State.I, EventKind.STORE, None, L1State.IM),
    (L1State.S, EventKind.STORE, None, L1State.SM),
    (L1State.PO, EventKind.ACK, L1State.I, L1State.O),
    (L1State.E, EventKind.STORE, None, L1State.M),
    (L1State.F, EventKind.RETRY, None, L1State.IM),
    (L1State.F, EventKind.COMPLETE, None, L1State.IM),
])
def test_l1_override_next_states(state, event, strict_next, errata_next):
    assert l1_table_lookup(state, event, TableMode.STRICT).next is strict_next
    assert l1_table_lookup(state, event, TableMode.ERRATA).next is errata_next


def test_l2_po_ack_override():
    assert l2_table_lookup(L2State.PO, EventKind.ACK, TableMode.STRICT).next is L2State.I
    assert l2_table_lookup(L2State.PO, EventKind.ACK, TableMode.ERRATA).next is L2State.O


def test_alias_cells_keep_literal_spelling_in_strict():
    strict = l1_table_lookup(L1State.PO, EventKind.SPECIAL_GETS, TableMode.STRICT)
    errata = l1_table_lookup(L1State.PO, EventKind.SPECIAL_GETS, TableMode.ERRATA)
    assert strict.actions == (ActionKind.SEND_TOKEN,)
    assert errata.actions == (ActionKind.SEND_1_TOKEN,)
    assert ActionKind.ASK_RETRY_BC.canonical is ActionKind.ASK_TO_RETRY_BC


def test_variant_spelling_is_normalized_in_both_modes():
    for mode in TableMode:
        cell = l1_table_lookup(L1State.S, EventKind.GETX, mode)
        assert cell.actions == (ActionKind.SEND_ALL_TOKENS,)


def test_freeze_is_reachable_only_with_a_pending_store():
    pending = pending_store_states(TableMode.ERRATA)
    assert L1State.IM in pending
    assert L1State.SM in pending
    assert L1State.M not in pending
    report = validate_tables(TableMode.ERRATA)
    assert f"L1,{L1State.IM.value},FreezeGETX" not in report.unreachable
    assert "L1,M,FreezeGETX" in report.unreachable
