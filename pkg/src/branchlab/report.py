"""Report records and their JSON / markdown serializations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

FORMAT_VERSION = 1


def jsonable(x: Any) -> Any:
    """A JSON-ready copy of x with exact numbers kept exact (as strings when not integers)."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, float):
        return x
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (set, frozenset)):
        return sorted((jsonable(v) for v in x), key=repr)
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if hasattr(x, "item"):  # numpy scalars
        return jsonable(x.item())
    return str(x)


@dataclass
class Record:
    id: str
    anchor: str
    expected: Any
    computed: Any
    status: str  # "pass" or "fail"

    def as_dict(self) -> dict:
        return {"id": self.id, "anchor": self.anchor, "expected": jsonable(self.expected),
                "computed": jsonable(self.computed), "status": self.status}


@dataclass
class ReportDocument:
    config: dict
    records: list[Record] = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def add(self, id: str, anchor: str, expected, computed, passed: bool) -> Record:
        taken = {r.id for r in self.records}
        rid, n = id, 2
        while rid in taken:
            rid, n = f"{id} #{n}", n + 1
        rec = Record(rid, anchor, expected, computed, "pass" if passed else "fail")
        self.records.append(rec)
        return rec

    @property
    def summary(self) -> dict:
        failed = sum(r.status == "fail" for r in self.records)
        return {"total": len(self.records), "passed": len(self.records) - failed, "failed": failed}

    @property
    def exit_code(self) -> int:
        return 1 if self.summary["failed"] else 0

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "version": FORMAT_VERSION,
            "config": jsonable(self.config),
            "records": [r.as_dict() for r in sorted(self.records, key=lambda r: r.id)],
            "summary": self.summary,
        }
        if timing:
            out["timing"] = {k: round(v, 3) for k, v in sorted(self.timing.items())}
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), indent=2, sort_keys=False) + "\n"

    def to_markdown(self) -> str:
        d = self.as_dict()
        lines = ["# branchlab report", "", "## Configuration", "", "| key | value |", "|---|---|"]
        lines += [f"| {k} | {_cell(v)} |" for k, v in d["config"].items()]
        lines += ["", "## Records", "", "| id | anchor | expected | computed | status |", "|---|---|---|---|---|"]
        for r in d["records"]:
            lines.append(f"| {_cell(r['id'])} | {_cell(r['anchor'])} | {_cell(r['expected'])} | "
                         f"{_cell(r['computed'])} | {r['status']} |")
        s = d["summary"]
        lines += ["", "## Summary", "", f"{s['passed']} of {s['total']} records passed, {s['failed']} failed."]
        if d.get("timing"):
            lines += ["", "## Timing (s)", "", "| suite | seconds |", "|---|---|"]
            lines += [f"| {k} | {v} |" for k, v in d["timing"].items()]
        return "\n".join(lines) + "\n"


def _cell(v) -> str:
    s = v if isinstance(v, str) else json.dumps(v)
    return s.replace("|", "\\|")


def emit(report: ReportDocument, fmt: str = "json") -> bytes:
    if fmt == "json":
        return report.to_json().encode()
    if fmt == "markdown":
        return report.to_markdown().encode()
    raise ValueError(f"unknown format {fmt!r}")


def records_from_json(data: bytes | str) -> list[Record]:
    doc = json.loads(data)
    return [Record(r["id"], r["anchor"], r["expected"], r["computed"], r["status"]) for r in doc["records"]]
