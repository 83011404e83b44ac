import pytest
from typer.testing import CliRunner

from lockesim.cli import app
from lockesim.config import VERSION

runner = CliRunner()


@pytest.fixture
def fenced(tmp_path):
    path = tmp_path / "fenced.trace"
    path.write_text("0 ST 4 7\nFENCE\n1 LD 4\n")
    return path


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert VERSION in result.output


def test_run_plain(fenced):
    result = runner.invoke(app, ["run", "--trace", str(fenced), "--n-l1", "2", "--policy", "fifo", "--plain"])
    assert result.exit_code == 0, result.output
    assert "run mode=errata policy=fifo seed=0" in result.output
    assert "result PASS" in result.output


def test_run_with_chart(fenced):
    result = runner.invoke(app, ["run", "-t", str(fenced), "--n-l1", "2", "--policy", "fifo", "--msc"])
    assert result.exit_code == 0, result.output
    assert "L1#0" in result.output
    assert "All checks passed" in result.output


def test_msc_command(fenced):
    result = runner.invoke(app, ["msc", "-t", str(fenced), "--n-l1", "2", "--policy", "fifo", "--addr", "4"])
    assert result.exit_code == 0, result.output
    assert " step" in result.output


def test_explore_single_load(tmp_path):
    trace = tmp_path / "load.trace"
    trace.write_text("0 LD 0\n")
    result = runner.invoke(app, ["explore", "--trace", str(trace), "--depth", "20"])
    assert result.exit_code == 0, result.output
    assert "visited 9" in result.output


def test_explore_writes_counterexample(tmp_path):
    trace = tmp_path / "store.trace"
    trace.write_text("0 ST 0 1\n")
    out = tmp_path / "cex.schedule"
    result = runner.invoke(app, ["explore", "-t", str(trace), "--mode", "strict", "--out", str(out)])
    assert result.exit_code == 1
    assert out.read_text().startswith("issue 0\n")
    assert (tmp_path / "cex.schedule.trace").read_text() == "0 ST 0 1\n"

    replay = runner.invoke(app, ["run", "-t", str(trace), "--schedule", str(out), "--mode", "strict",
                                 "--n-l1", "2", "--tokens", "2", "--policy", "adversarial", "--plain"])
    assert replay.exit_code == 1
    assert "VIOLATION" in replay.output


def test_tables_dump():
    result = runner.invoke(app, ["tables", "--dump", "--which", "L1"])
    assert result.exit_code == 0
    assert sum(line.startswith("L1,") for line in result.output.splitlines()) == 168


def test_tables_validate():
    result = runner.invoke(app, ["tables", "--validate", "--mode", "errata"])
    assert result.exit_code == 0, result.output
    assert "8 override(s)" in result.output


def test_fuzz_csv(tmp_path):
    csv = tmp_path / "fuzz.csv"
    result = runner.invoke(app, ["fuzz", "--ops", "20", "--seeds", "2", "--n-l1", "2", "--workers", "1",
                                 "--csv", str(csv), "--artifacts", str(tmp_path / "artifacts")])
    assert result.exit_code in (0, 1)
    assert csv.exists()


@pytest.mark.parametrize("args", [
    ["run", "--trace", "does-not-exist.trace"],
    ["run", "--mode", "loose", "--trace", "{trace}"],
    ["run", "--policy", "lifo", "--trace", "{trace}"],
    ["tables"],
    ["tables", "--dump", "--which", "L3"],
])
def test_usage_errors_exit_2(args, fenced):
    args = [a.replace("{trace}", str(fenced)) for a in args]
    result = runner.invoke(app, args)
    assert result.exit_code == 2


def test_bad_trace_exits_2(tmp_path):
    trace = tmp_path / "bad.trace"
    trace.write_text("0 LD 0\n7 LD 0\n")
    result = runner.invoke(app, ["run", "-t", str(trace), "--n-l1", "2"])
    assert result.exit_code == 2
    assert "cpu out of range at line 2" in result.output
