import json
import math

import numpy as np
import pytest

from wgelastic.bench.cli import main, parse_levels
from wgelastic.bench.convergence import (
    ConvergenceReport,
    ConvergenceRow,
    observed_order,
    run_convergence,
    run_locking_sweep,
)
from wgelastic.bench.selftest import CheckResult, run_selftest
from wgelastic.bench.tables import emit_table, read_csv, to_csv, to_markdown


def make_report(errors, case="ex2d1", dim=2):
    rep = ConvergenceReport(case, "new", 1.0, 1e8, dim)
    for k, (e, l2) in enumerate(errors):
        rep.add_row(ConvergenceRow(2 ** (k + 3), 2.0 ** -(k + 3) * math.sqrt(2), e, l2, solver="direct",
                                   iterations="direct", residual=1e-15))
    return rep


def test_observed_order_examples():
    assert observed_order(0.4, 0.1) == pytest.approx(2.0)
    assert observed_order(6.7697e-01, 3.4495e-01) == pytest.approx(math.log2(6.7697e-01 / 3.4495e-01))


def test_first_row_has_no_order():
    rep = make_report([(0.5, 0.1)])
    assert rep.rows[0].energy_order is None and rep.rows[0].l2_order is None
    md = to_markdown(rep)
    assert md.count("--") >= 2
    assert "5.0000e-01" in md and "1.0000e-01" in md


def test_markdown_layout():
    rep = make_report([(0.5, 0.1), (0.25, 0.025), (0.125, 0.00625)])
    lines = to_markdown(rep).strip().splitlines()
    assert lines[0].startswith("**ex2d1**")
    header = [c.strip() for c in lines[2].strip("|").split("|")]
    assert header == ["1/h", "energy error", "order", "L2 error", "order"]
    rows = [[c.strip() for c in line.strip("|").split("|")] for line in lines[4:]]
    assert [r[0] for r in rows] == ["8", "16", "32"]
    assert rows[1][2] == "1.0000" and rows[1][4] == "2.0000"
    assert len({len(line) for line in lines[2:]}) == 1  # aligned columns


def test_3d_tables_label_levels():
    assert "Level" in to_markdown(make_report([(1.0, 1.0)], case="ex3d1", dim=3))


def test_csv_round_trip_is_exact():
    rng = np.random.default_rng(0)
    rep = make_report([tuple(rng.uniform(1e-6, 1.0, 2)) for _ in range(4)])
    rows = read_csv(to_csv(rep))
    for parsed, row in zip(rows, rep.rows):
        assert parsed["energy_error"] == row.energy_error
        assert parsed["l2_error"] == row.l2_error
        assert parsed["energy_order"] == row.energy_order
        assert parsed["level"] == row.level
        assert parsed["energy_error_fmt"] == f"{row.energy_error:.4e}"


def test_emit_table(tmp_path):
    rep = make_report([(0.5, 0.1), (0.25, 0.025)])
    path = tmp_path / "t.csv"
    text = emit_table([rep], "csv", path)
    assert path.read_text() == text
    with pytest.raises(ValueError):
        emit_table(rep, "latex")
    with pytest.raises(OSError):
        emit_table(rep, "markdown", tmp_path / "missing" / "t.md")


def test_run_convergence_small():
    rep = run_convergence("ex2d1", "new", 1.0, 1.0, [4, 8, 16])
    assert [r.level for r in rep.rows] == [4, 8, 16]
    assert all(r.residual <= 1e-12 for r in rep.rows)
    assert 0.8 < rep.rows[-1].energy_order < 1.2
    with pytest.raises(ValueError):
        run_convergence("ex2d1", "new", 1.0, 1.0, [8, 4])
    with pytest.raises(ValueError):
        run_convergence("ex2d1", "fancy", 1.0, 1.0, [4])


def test_locking_sweep_order():
    reps = run_locking_sweep("ex2d1", ["new", "standard"], 1.0, [1.0, 1e4], [4])
    assert [(r.algorithm, r.lam) for r in reps] == [("new", 1.0), ("new", 1e4), ("standard", 1.0), ("standard", 1e4)]


def test_selftest_passes():
    results = run_selftest()
    assert results and all(isinstance(r, CheckResult) for r in results)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    json.dumps([r.to_dict() for r in results])


# -- command line ---------------------------------------------------------------

def test_parse_levels():
    assert parse_levels("8,16,32") == [8, 16, 32]
    assert parse_levels("2..5") == [2, 3, 4, 5]


def test_cli_converge_markdown(capsys):
    assert main(["converge", "--case", "ex2d1", "--algorithm", "new", "--mu", "1", "--lambda", "1",
                 "--levels", "4,8"]) == 0
    out = capsys.readouterr().out
    assert "| 1/h |" in out.replace("  ", " ") or "1/h" in out
    assert out.count("\n") >= 5


def test_cli_converge_csv_to_file(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["converge", "--case", "ex2d3", "--algorithm", "standard", "--lambda", "100",
                 "--levels", "4,8", "--format", "csv", "--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert [r["level"] for r in rows] == [4, 8]
    assert rows[0]["case"] == "ex2d6"


def test_cli_locking(capsys):
    assert main(["locking", "--case", "ex2d1", "--algorithms", "new,standard", "--lambdas", "1,1e8",
                 "--levels", "4"]) == 0
    assert capsys.readouterr().out.count("**ex2d1**") == 4


def test_cli_unwritable_destination_fails_with_json(tmp_path, capsys):
    code = main(["converge", "--case", "ex2d1", "--levels", "4", "--out", str(tmp_path / "no" / "x.md")])
    assert code != 0
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["status"] == "failed" and summary["error"] == "unwritable destination"


def test_cli_invalid_levels_fail_with_json(capsys):
    assert main(["converge", "--case", "ex2d1", "--levels", "8,4"]) != 0
    assert json.loads(capsys.readouterr().err.strip())["error"] == "invalid input"


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["converge", "--case", "nope", "--levels", "4"])
    assert info.value.code != 0
    with pytest.raises(SystemExit):
        main(["locking", "--case", "ex2d1", "--algorithms", "new,fancy", "--levels", "4"])


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5
