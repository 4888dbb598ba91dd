import json
import logging
from fractions import Fraction

import pytest

from branchlab import groups
from branchlab.cli import main
from branchlab.report import ReportDocument, emit, jsonable, records_from_json
from branchlab.suites import ConfigError, RunConfig, required_precision, run, validate


def test_empty_report_is_valid():
    doc = ReportDocument({"suite": "none"})
    d = json.loads(emit(doc))
    assert d["records"] == [] and d["summary"] == {"total": 0, "passed": 0, "failed": 0}
    assert doc.exit_code == 0
    assert "0 of 0 records passed" in emit(doc, "markdown").decode()
    with pytest.raises(ValueError):
        emit(doc, "xml")


def test_failing_record_sets_exit_code_and_ids_stay_unique():
    doc = ReportDocument({})
    doc.add("x", "a", 1, 1, True)
    doc.add("x", "a", 1, 2, False)
    assert [r.id for r in doc.records] == ["x", "x #2"]
    assert doc.exit_code == 1 and doc.summary["failed"] == 1


def test_json_round_trip():
    doc = ReportDocument({"r": Fraction(1, 2)})
    doc.add("b", "anchor | with bar", Fraction(3, 4), {2, 1}, True)
    doc.add("a", "anchor", Fraction(4, 2), [1, 2], True)
    back = records_from_json(emit(doc))
    assert [r.id for r in back] == ["a", "b"]
    assert back[1].expected == "3/4" and back[1].computed == [1, 2]
    assert back[0].expected == 2
    assert "\\|" in doc.to_markdown()
    assert jsonable({"k": (Fraction(1, 3),)}) == {"k": ["1/3"]}


def test_ring_run_is_deterministic():
    a = run(RunConfig(suite="ring", p=5))
    b = run(RunConfig(suite="ring", p=5))
    assert a.to_json(timing=False) == b.to_json(timing=False)
    assert a.exit_code == 0 and a.summary["total"] > 0


def test_cold_and_warm_cache_agree(tmp_path):
    try:
        groups.clear_memo()
        cold = run(RunConfig(suite="group", p=3, cache_dir=str(tmp_path), cap=100_000))
        groups.clear_memo()
        warm = run(RunConfig(suite="group", p=3, cache_dir=str(tmp_path), cap=100_000))
    finally:
        groups.set_cache_dir(None)
        groups.clear_memo()
    assert any(tmp_path.iterdir())
    assert cold.to_json(timing=False) == warm.to_json(timing=False)


def test_precision_is_raised_with_a_warning(caplog):
    cfg = RunConfig(suite="depth-zero", d_max=3, precision=2)
    with caplog.at_level(logging.WARNING, logger="branchlab"):
        validate(cfg)
    assert cfg.precision == required_precision(cfg) == 5
    assert "raising N" in caplog.text


@pytest.mark.parametrize("bad", [
    RunConfig(p=4), RunConfig(suite="k2r", torus="T11", r=Fraction(1, 2)), RunConfig(torus="Txx"),
    RunConfig(d_max=0), RunConfig(cuspidal="first"), RunConfig(jobs=0),
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        validate(bad)


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["--suite", "ring", "--p", "3", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["config"]["p"] == 3 and d["summary"]["failed"] == 0
    assert main(["--suite", "ring", "--p", "9"]) == 2
    assert main(["--suite", "k2r", "--torus", "T11", "--depth", "1/2"]) == 2
    assert main(["--suite", "group", "--cap", "10"]) == 3
    capsys.readouterr()
    assert main(["--suite", "ring", "--format", "markdown"]) == 0
    assert capsys.readouterr().out.startswith("# branchlab report")
    with pytest.raises(SystemExit):
        main(["--depth", "x/y"])
