import pytest
from hypothesis import given, strategies as st

from lockesim.core.errors import TraceError
from lockesim.core.protocol import OpKind
from lockesim.data.load_data import sample_trace
from lockesim.services.workload import (
    Fence, TraceOp, WritebackDirective, generate_workload, load_trace, parse_trace, render_trace,
)


def test_parse_ops_fences_and_writebacks():
    text = """
    # producer / consumer
    0 ST 4 7
    FENCE
    1 ld 4      # lower case is fine
    WB 4
    """
    items = parse_trace(text, n_l1=2)
    assert items == [
        TraceOp(0, OpKind.STORE, 4, 7, line_no=3),
        Fence(line_no=4),
        TraceOp(1, OpKind.LOAD, 4, None, line_no=5),
        WritebackDirective(4, line_no=6),
    ]


def test_render_is_the_canonical_text():
    items = parse_trace("0 ST 4 7\nFENCE\n1 LD 4\nWB 4\n", n_l1=2)
    assert render_trace(items) == "0 ST 4 7\nFENCE\n1 LD 4\nWB 4\n"


@pytest.mark.parametrize("text, message", [
    ("2 LD 0", "cpu out of range at line 1"),
    ("0 LD x", "bad address 'x' at line 1"),
    ("\n0 XX 1", "malformed operation '0 XX 1' at line 2"),
    ("0 ST 1", "malformed operation"),
    ("0 LD 1 2", "malformed operation"),
    ("0 LD", "expected '<cpu> LD <addr>'"),
    ("WB", "expected 'WB <addr>' at line 1"),
    ("FENCE now", "FENCE takes no arguments at line 1"),
    ("-1 LD 0", "negative cpu at line 1"),
])
def test_malformed_traces(text, message):
    with pytest.raises(TraceError) as err:
        parse_trace(text, n_l1=2)
    assert message in str(err.value)


def test_address_space_is_enforced():
    with pytest.raises(TraceError) as err:
        parse_trace("0 LD 64", n_l1=1, address_space=64)
    assert err.value.line_no == 1
    assert parse_trace("0 LD 63", n_l1=1, address_space=64)


def test_load_trace_reports_missing_files(tmp_path):
    with pytest.raises(TraceError):
        load_trace(tmp_path / "missing.trace", n_l1=2)
    path = tmp_path / "one.trace"
    path.write_text("0 LD 1\n")
    assert load_trace(path, n_l1=2) == [TraceOp(0, OpKind.LOAD, 1, None, line_no=1)]


@pytest.mark.parametrize("name", ["race", "fenced", "explore"])
def test_packaged_traces_parse(name):
    assert parse_trace(sample_trace(name), n_l1=2)


def test_generated_workload_is_reproducible():
    a = generate_workload(200, seed=11, n_l1=4, blocks=3)
    assert a == generate_workload(200, seed=11, n_l1=4, blocks=3)
    assert a != generate_workload(200, seed=12, n_l1=4, blocks=3)
    assert len(a) == 200
    assert {op.addr for op in a} <= {0, 1, 2}
    assert {op.cpu for op in a} <= {0, 1, 2, 3}
    assert all((op.value is None) == (op.kind is OpKind.LOAD) for op in a)


@given(st.integers(0, 60), st.integers(0, 2**16), st.integers(1, 6))
def test_rendered_workload_parses_back(n_ops, seed, n_l1):
    ops = generate_workload(n_ops, seed, n_l1)
    parsed = parse_trace(render_trace(ops), n_l1)
    assert [str(op) for op in parsed] == [str(op) for op in ops]


def test_store_ratio_extremes():
    assert all(op.kind is OpKind.LOAD for op in generate_workload(50, 0, 2, store_ratio=0.0))
    assert all(op.kind is OpKind.STORE for op in generate_workload(50, 0, 2, store_ratio=1.0))
