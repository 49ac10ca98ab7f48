import csv

import pytest

from tangency_lab import cli
from tangency_lab import params as P


def rows(path):
    with path.open(newline="") as fh:
        return list(csv.reader(fh))


def test_validate_reference(tmp_path, capsys):
    assert cli.main(["validate", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "validation.csv")
    assert table[0] == ["constraint", "verdict", "lhs", "rhs"]
    assert len(table) == 19 and all(r[1] == "pass" for r in table[1:])
    assert "FAIL" not in capsys.readouterr().out


def test_validate_float_mode(tmp_path):
    assert cli.main(["validate", "--mode", "float", "--out", str(tmp_path)]) == 0


def test_validate_reports_broken_contraction(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    P.save(P.reference_instance().with_changes(lambda_u=3), cfg)
    assert cli.main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "contraction" in err
    verdicts = {r[0]: r[1] for r in rows(tmp_path / "validation.csv")[1:]}
    assert verdicts["contraction"] == "FAIL"


@pytest.mark.parametrize("argv", [
    ["validate", "--config", "/nonexistent/params.cfg"],
    ["frobnicate"],
    ["build", "--k-max", "0"],
    ["simulate", "--variant", "custom"],
])
def test_usage_errors_exit_2(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2


def test_malformed_config_exits_2(tmp_path):
    cfg = tmp_path / "junk.cfg"
    cfg.write_text("lambda_u = 2.02\nflux = 1\n")
    assert cli.main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_build_rejects_float_mode(tmp_path):
    assert cli.main(["build", "--mode", "float", "--out", str(tmp_path)]) == 2


def test_build_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["build", "--k-max", "2", "--out", str(a)]) == 0
    assert cli.main(["build", "--k-max", "2", "--out", str(b)]) == 0
    assert "centre alignment exact" in capsys.readouterr().out
    names = sorted(p.name for p in a.iterdir())
    assert names == ["centres.csv", "codes.csv", "linked_pairs.csv", "schedule.csv", "separation.csv"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    codes = rows(a / "codes.csv")
    assert [r[0] for r in codes[1:]] == ["1", "2"]
    assert codes[1][2] == "0" and codes[2][2] == "0000"


def test_verify_writes_reports(tmp_path, capsys):
    # nesting has no verified exponent at the reference parameters, so verify exits 1
    assert cli.main(["verify", "--k-max", "2", "--samples", "2", "--out", str(tmp_path)]) == 1
    assert "return map agrees: True" in capsys.readouterr().out
    rm = rows(tmp_path / "return_map.csv")
    assert rm[1][:2] == ["1", "exact"] and float(rm[1][2]) == 0.0
    assert rows(tmp_path / "nesting.csv")[0][:3] == ["k", "axis", "margin"]
    assert len(rows(tmp_path / "diameters.csv")) == 3


def test_simulate_aborts_on_majority(tmp_path, capsys):
    assert cli.main(["simulate", "--variant", "historic", "--eras", "2", "--out", str(tmp_path)]) == 1
    assert "majority condition fails" in capsys.readouterr().err
    table = rows(tmp_path / "majority.csv")
    assert table[0] == ["k", "zeros", "ones", "ok"] and "False" in [r[3] for r in table[1:]]


def test_simulate_single_block_is_inconclusive(tmp_path, capsys):
    assert cli.main(["simulate", "--blocks", "1", "--diagnostic", "--out", str(tmp_path)]) == 1
    assert "inconclusive after 1 steps" in capsys.readouterr().out
    assert len(rows(tmp_path / "series.csv")) == 2
