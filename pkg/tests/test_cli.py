import json
from fractions import Fraction

import pytest

from fpstable import benchmarks
from fpstable.cli import parse_ranges, run
from fpstable.codegen import find_compiler

VWCV_RANGES = "s=0:1000,v=1:200"


@pytest.fixture
def program(tmp_path):
    def write(text, name="prog.rnl"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def test_parse_ranges():
    assert parse_ranges("s=0:1000, v=-1.5:2") == {
        "s": (Fraction(0), Fraction(1000)), "v": (Fraction(-3, 2), Fraction(2))}
    assert parse_ranges(None) == {}


def test_analyze_json(program, capsys):
    path = program(benchmarks.source("vwcv"))
    assert run(["analyze", path, "--ranges", VWCV_RANGES, "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["schemaVersion"] == 1
    assert len(data["functions"]["tcoa"]["cebs"]) == 4


def test_transform_prints_program(program, capsys):
    assert run(["transform", program(benchmarks.source("vwcv")), "--ranges", VWCV_RANGES]) == 0
    assert "tcoa(s, v, e) = if s * v < -e then" in capsys.readouterr().out


def test_emit_c_writes_files(program, tmp_path):
    out = tmp_path / "out"
    assert run(["emit-c", program(benchmarks.source("chain")), "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert len(names) == 3
    assert any(n.endswith(".c") for n in names) and any(n.endswith(".h") for n in names)


def test_fuzz_report(program, tmp_path):
    report = tmp_path / "r.json"
    code = run(["fuzz", program(benchmarks.source("chain")), "--samples", "300",
                "--report", str(report)])
    assert code == 0
    data = json.loads(report.read_text())
    assert data["schemaVersion"] == 1
    assert set(data["functions"]) == {"h", "g", "f"}


@pytest.mark.skipif(find_compiler() is None, reason="no C compiler")
def test_check_passes(program):
    assert run(["check", program(benchmarks.source("chain")), "--samples", "600"]) == 0


def test_thread_count_does_not_change_results(program, tmp_path):
    path = program(benchmarks.source("regions"))
    reports = []
    for threads in ("1", "3"):
        r = tmp_path / f"r{threads}.json"
        assert run(["fuzz", path, "--samples", "200", "--threads", threads, "--report", str(r)]) == 0
        data = json.loads(r.read_text())
        for f in data["functions"].values():
            f.pop("seconds")
        data["total"].pop("seconds")
        reports.append(data)
    assert reports[0] == reports[1]


@pytest.mark.parametrize("args, text, code", [
    (["analyze"], None, 2),
    (["analyze", "--format", "quad"], "f(x) = x", 2),
    (["analyze"], "f(x) = x +", 3),
    (["analyze"], "f(x) = y", 4),
    (["fuzz"], benchmarks.source("vwcv"), 5),
    (["analyze", "--ranges", "x=0:"], "f(x) = x", 2),
])
def test_exit_codes(program, args, text, code, capsys):
    argv = [args[0]] + ([program(text)] if text is not None else ["/nonexistent.rnl"]) + args[1:]
    assert run(argv) == code
