"""Verification reports and their canonical text form.

A report is a set of clause records plus flat build provenance. The text
form is UTF-8 with LF endings: a header block, one ``[clause <id>]`` section
per clause in sorted id order and a final ``[provenance]`` section; keys are
sorted inside every block. Strings are JSON-quoted, booleans are
``true``/``false`` and floats use ``repr``, so parsing and re-serializing a
report reproduces it byte for byte.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

FORMAT_TAG = "fatoukit-report 1"


class ReportFormatError(ValueError):
    pass


@dataclass
class ClauseRecord:
    """One certified property.

    ``value`` is the measured quantity, ``tolerance`` the bound it is held
    to and ``margin`` the signed slack (positive is good). ``prop`` names the
    property family, e.g. ``itinerary`` or ``fixed-point``.
    """

    id: str
    prop: str
    passed: bool
    value: float
    tolerance: float
    margin: float
    samples: int

    def as_dict(self) -> dict:
        return {"passed": bool(self.passed), "property": self.prop, "value": float(self.value),
                "tolerance": float(self.tolerance), "margin": float(self.margin),
                "samples": int(self.samples)}


@dataclass
class VerificationReport:
    mode: str
    stages: int
    clauses: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    # -- building -------------------------------------------------------
    def add(self, record: ClauseRecord) -> ClauseRecord:
        if record.id in self.clauses:
            raise ValueError(f"duplicate clause id {record.id!r}")
        if "]" in record.id or "\n" in record.id:
            raise ValueError(f"clause id {record.id!r} contains a reserved character")
        self.clauses[record.id] = record
        return record

    def bound(self, cid: str, prop: str, value: float, tolerance: float, samples: int) -> ClauseRecord:
        """Clause ``value <= tolerance``."""
        value = float(value)
        margin = tolerance - value if math.isfinite(value) else -math.inf
        return self.add(ClauseRecord(cid, prop, bool(value <= tolerance), value, float(tolerance), margin, samples))

    def positive(self, cid: str, prop: str, margin: float, samples: int, floor: float = 0.0) -> ClauseRecord:
        """Clause ``margin > floor`` (or ``margin >= floor`` when ``floor > 0``)."""
        margin = float(margin)
        ok = margin > 0 and (margin >= floor)
        return self.add(ClauseRecord(cid, prop, bool(ok), margin, float(floor), margin - floor, samples))

    def note(self, key: str, value) -> None:
        if isinstance(value, dict):
            for k, v in value.items():
                self.note(f"{key}.{k}", v)
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value):
                self.note(f"{key}.{i}", v)
        else:
            self.provenance[key] = _scalar(value)

    # -- queries ----------------------------------------------------------
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses.values())

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def failures(self) -> list:
        return [c for _, c in sorted(self.clauses.items()) if not c.passed]

    def select(self, prefix: str) -> list:
        return [c for cid, c in sorted(self.clauses.items()) if cid.startswith(prefix)]

    # -- text form ----------------------------------------------------------
    def to_text(self) -> str:
        head = {"clauses": len(self.clauses), "failed": len(self.failures()), "mode": self.mode,
                "stages": self.stages, "verdict": self.verdict}
        lines = [FORMAT_TAG]
        lines += [f"{k} = {_encode(v)}" for k, v in sorted(head.items())]
        for cid in sorted(self.clauses):
            lines.append("")
            lines.append(f"[clause {cid}]")
            lines += [f"{k} = {_encode(v)}" for k, v in sorted(self.clauses[cid].as_dict().items())]
        lines.append("")
        lines.append("[provenance]")
        lines += [f"{k} = {_encode(v)}" for k, v in sorted(self.provenance.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VerificationReport":
        rows = text.split("\n")
        if not rows or rows[0] != FORMAT_TAG:
            raise ReportFormatError("missing report header")
        head: dict = {}
        sections: list = []
        cur = head
        for ln in rows[1:]:
            if not ln:
                continue
            m = re.fullmatch(r"\[(clause (.+)|provenance)\]", ln)
            if m:
                cur = {}
                sections.append((m.group(2), cur))
                continue
            key, sep, raw = ln.partition(" = ")
            if not sep:
                raise ReportFormatError(f"bad line {ln!r}")
            cur[key] = _decode(raw)
        try:
            rep = cls(head["mode"], int(head["stages"]))
            for cid, body in sections:
                if cid is None:
                    rep.provenance = body
                else:
                    rep.add(ClauseRecord(cid, body["property"], body["passed"], body["value"],
                                         body["tolerance"], body["margin"], body["samples"]))
        except KeyError as exc:
            raise ReportFormatError(f"missing field {exc}") from exc
        if head.get("verdict") != rep.verdict:
            raise ReportFormatError("stored verdict disagrees with the clause records")
        return rep


def _scalar(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, complex):
        return f"{v.real!r}{'+' if v.imag >= 0 else '-'}{abs(v.imag)!r}j"
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)


def _encode(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return json.dumps(str(v), ensure_ascii=False)


def _decode(raw: str):
    if raw == "true":
        return True
    if raw == "false":
        return False
    if raw == "null":
        return None
    if raw.startswith('"'):
        return json.loads(raw)
    if re.fullmatch(r"-?\d+", raw):
        return int(raw)
    try:
        return float(raw)
    except ValueError as exc:
        raise ReportFormatError(f"cannot decode value {raw!r}") from exc
