from pathlib import Path

import pytest

from igacontact.cli import main
from igacontact.post import read_csv

CFG = Path(__file__).resolve().parents[1] / "scenes" / "tube-sheath.cfg"


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", "--scene", str(CFG), "--out", str(tmp_path), "--steps", "3"]) == 0
    out = capsys.readouterr().out
    assert "50 elements, 196 DOF, 3 steps" in out
    assert "wall time" in out
    for name in ("history.csv", "contact_pairs.csv", "stress_field.csv", "summary.txt"):
        assert (tmp_path / name).is_file()
    _, rows = read_csv(tmp_path / "history.csv")
    assert len(rows) == 3


def test_run_insertions_override(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--steps", "2", "--insertions", "0"]) == 0
    assert "2 elements, 36 DOF" in capsys.readouterr().out


def test_converge(tmp_path, capsys):
    assert main(["converge", "--out", str(tmp_path), "--steps", "2", "--insertions", "0,2"]) == 0
    _, rows = read_csv(tmp_path / "converge.csv")
    assert [r[0] for r in rows] == [0, 2]


def test_penalty_sweep(tmp_path, capsys):
    assert main(["penalty-sweep", "--out", str(tmp_path), "--steps", "2", "--epsilons", "1e11,1e12"]) == 0
    _, rows = read_csv(tmp_path / "penalty.csv")
    assert [r[1] for r in rows] == ["ok", "ok"]


def test_facet_compare(tmp_path, capsys):
    assert main(["facet-compare", "--out", str(tmp_path), "--steps", "2", "--segments", "8"]) == 0
    _, rows = read_csv(tmp_path / "facet.csv")
    assert [r[0] for r in rows] == ["exact", "faceted"]


def test_validate_quick(capsys):
    assert main(["validate", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out
    assert "FAIL" not in out


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("geometry:\n  tube:\n    outer_diameter: abc\n")
    assert main(["run", "--scene", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("config error: ") and "line 3" in err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--scene", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize(
    "argv",
    [["frobnicate"], [], ["run", "--steps", "0"], ["converge", "--insertions", "a,b"], ["penalty-sweep", "--epsilons", "x"]],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
