import pytest
from hypothesis import given, strategies as st

from lockesim.core.errors import ProtocolFault
from lockesim.core.protocol import (
    L2_NODE, MEMORY_NODE, Message, MessageKind, NodeId, Priority, RetryKind,
    TokenBundle, payload_kind, l1_node,
)

counts = st.integers(min_value=0, max_value=64)


@st.composite
def bundles(draw):
    count = draw(counts)
    owner = draw(st.booleans()) if count else False
    return TokenBundle(count, owner)


@given(bundles(), bundles())
def test_merge_adds_counts_and_keeps_a_single_owner(a, b):
    if a.owner and b.owner:
        with pytest.raises(ProtocolFault):
            a.merge(b)
        return
    merged = a.merge(b)
    assert merged.count == a.count + b.count
    assert merged.owner == (a.owner or b.owner)


@given(bundles(), bundles())
def test_minus_undoes_merge(a, b):
    if a.owner and b.owner:
        return
    assert a.merge(b).minus(b) == a


@given(bundles(), bundles())
def test_minus_never_overdraws(held, taken):
    strips_all_but_owner = held.owner and not taken.owner and taken.count == held.count
    if taken.count > held.count or (taken.owner and not held.owner) or strips_all_but_owner:
        with pytest.raises(ProtocolFault):
            held.minus(taken)
    else:
        rest = held.minus(taken)
        assert rest.count == held.count - taken.count


def test_owner_needs_a_token():
    with pytest.raises(ProtocolFault):
        TokenBundle(0, owner=True)
    with pytest.raises(ProtocolFault):
        TokenBundle(-1)


@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 7)), min_size=1, unique=True))
def test_priority_is_a_total_order_on_birth_then_node(pairs):
    priorities = [Priority(b, n) for b, n in pairs]
    best = min(priorities)
    assert (best.birth, best.node) == min(pairs)
    for p in priorities:
        assert best.beats(p) or best == p
        assert p.beats(None)


def test_older_request_beats_younger_regardless_of_node():
    assert Priority(1, 3).beats(Priority(2, 0))
    assert Priority(1, 0).beats(Priority(1, 1))
    assert not Priority(2, 0).beats(Priority(1, 3))


def test_node_names_round_trip():
    for node in (l1_node(0), l1_node(3), L2_NODE, MEMORY_NODE):
        assert NodeId.parse(str(node)) == node
    assert sorted([MEMORY_NODE, L2_NODE, l1_node(1), l1_node(0)]) == [l1_node(0), l1_node(1), L2_NODE, MEMORY_NODE]
    with pytest.raises(ValueError):
        NodeId.parse("L3")


@pytest.mark.parametrize("bundle, has_data, expected", [
    (TokenBundle(4, True), True, MessageKind.DATA_ALL_TOKENS),
    (TokenBundle(2, True), True, MessageKind.DATA_OWNER),
    (TokenBundle(2), True, MessageKind.DATA_SHARED),
    (TokenBundle(2), False, MessageKind.TOKENS),
])
def test_payload_kind(bundle, has_data, expected):
    assert payload_kind(bundle, has_data, total=4) is expected


def test_owner_never_travels_without_data():
    with pytest.raises(ProtocolFault):
        payload_kind(TokenBundle(1, True), has_data=False, total=4)


@pytest.mark.parametrize("kwargs", [
    dict(kind=MessageKind.DATA_SHARED, payload=TokenBundle(1)),
    dict(kind=MessageKind.TOKENS, payload=TokenBundle(1), data=3),
    dict(kind=MessageKind.DATA_SHARED, payload=TokenBundle(1, True), data=3),
    dict(kind=MessageKind.DATA_OWNER, payload=TokenBundle(1), data=3),
    dict(kind=MessageKind.GETS, payload=TokenBundle(1)),
    dict(kind=MessageKind.RETRY, retry_kind=RetryKind.HINT),
])
def test_malformed_messages_are_rejected(kwargs):
    with pytest.raises(ProtocolFault):
        Message(addr=0, src=l1_node(0), dest=L2_NODE, origin=l1_node(0), **kwargs)


def test_descriptor_ignores_sequence_number():
    msg = Message(MessageKind.GETS, 4, l1_node(1), L2_NODE, origin=l1_node(1),
                  requester=l1_node(1), priority=Priority(3, 1))
    assert msg.descriptor() == "GETS a=4 L1#1->L2 org=L1#1 req=L1#1 pri=(3,#1)"
    assert msg.descriptor() == msg.readdress(l1_node(1), L2_NODE).descriptor()
