"""Line-delimited JSON report and trace files.

Every file starts with a header record naming the format and version.  Each
record is one JSON object per line with keys in a fixed order (the order of
the field tuples below), so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Union

from .contracts import SpeedLevel
from .hierarchy import Decision, FaultReport, Message
from .observers import Event

REPORT_FORMAT = "resman-report"
TRACE_FORMAT = "resman-trace"
VERSION = 1

SUMMARY_FIELDS = ("record", "architecture", "accounting", "decision_model", "fault_count",
                  "messages", "decisions", "recovery_time_ms", "message_ms", "decision_ms",
                  "handovers")
SCENARIO_FIELDS = ("record", "index", "label", "scenario_type", "token", "faults", "messages",
                   "decisions", "bin", "speed_after", "handover")
BIN_FIELDS = ("record", "bin", "count")
DIVERGENCE_FIELDS = ("record", "quantity", "value", "alternative", "basis")
EVENT_FIELDS = ("record", "seq", "t", "signal", "value", "token")
MESSAGE_FIELDS = ("record", "t", "sender", "receiver", "kind", "superseded", "token", "detail")
DECISION_FIELDS = ("record", "t", "maker", "action", "speed", "token")


class RecordError(ValueError):
    pass


def _line(fields: tuple, values: dict) -> str:
    return json.dumps({k: values[k] for k in fields}, separators=(",", ":"))


def _header(fmt: str, **extra) -> str:
    return json.dumps({"format": fmt, "version": VERSION, **extra}, separators=(",", ":"))


# --------------------------------------------------------------------------
# reports


def report_lines(report) -> list[str]:
    lines = [_header(REPORT_FORMAT, config_digest=report.config_digest,
                     script_digest=report.script_digest)]
    summary = {k: getattr(report, k) for k in SUMMARY_FIELDS[1:]}
    lines.append(_line(SUMMARY_FIELDS, {"record": "summary", **summary}))
    for s in report.scenarios:
        lines.append(_line(SCENARIO_FIELDS, {"record": "scenario", **vars(s)}))
    for name, count in report.bins:
        lines.append(_line(BIN_FIELDS, {"record": "bin", "bin": name, "count": count}))
    for d in report.divergences:
        lines.append(_line(DIVERGENCE_FIELDS, {"record": "divergence", **vars(d)}))
    return lines


def report_csv(report) -> str:
    """Per-scenario rows followed by a ``total`` row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = SCENARIO_FIELDS[1:]
    writer.writerow(("architecture", "accounting", *cols, "recovery_time_ms"))
    for s in report.scenarios:
        writer.writerow((report.architecture, report.accounting,
                         *(getattr(s, c) for c in cols), ""))
    writer.writerow((report.architecture, report.accounting, "total", "", "", "",
                     report.fault_count, report.messages, report.decisions, "", "",
                     report.handovers, report.recovery_time_ms))
    return buf.getvalue()


def write_report(report, path: Union[str, Path], fmt: str = "structured"):
    if fmt == "structured":
        text = "\n".join(report_lines(report)) + "\n"
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise RecordError(f"unknown report format {fmt!r}")
    Path(path).write_text(text)


def _records(path: Union[str, Path], fmt: str) -> tuple[dict, list[dict]]:
    lines = Path(path).read_text().splitlines()
    try:
        rows = [json.loads(line) for line in lines if line.strip()]
    except json.JSONDecodeError as exc:
        raise RecordError(f"{path}: not a {fmt} file ({exc})") from None
    if not rows or rows[0].get("format") != fmt:
        raise RecordError(f"{path}: missing {fmt} header")
    if rows[0].get("version") != VERSION:
        raise RecordError(f"{path}: unsupported version {rows[0].get('version')}")
    return rows[0], rows[1:]


def read_report(path: Union[str, Path]):
    from .harness import Divergence, RunReport, ScenarioResult

    header, rows = _records(path, REPORT_FORMAT)
    summary = [r for r in rows if r["record"] == "summary"]
    if len(summary) != 1:
        raise RecordError(f"{path}: expected one summary record")
    fields = {k: v for k, v in summary[0].items() if k != "record"}
    strip = lambda r: {k: v for k, v in r.items() if k != "record"}  # noqa: E731
    return RunReport(
        **fields,
        bins=tuple((r["bin"], r["count"]) for r in rows if r["record"] == "bin"),
        config_digest=header["config_digest"],
        script_digest=header["script_digest"],
        scenarios=tuple(ScenarioResult(**strip(r)) for r in rows if r["record"] == "scenario"),
        divergences=tuple(Divergence(**strip(r)) for r in rows if r["record"] == "divergence"),
    )


# --------------------------------------------------------------------------
# traces


def _message_record(m: Message) -> dict:
    p = m.payload
    if isinstance(p, FaultReport):
        token = p.token
        detail = {"contract": p.contract, "fault_class": p.fault_class.value,
                  "observed_latency": p.observed_latency,
                  "violation_amount": p.violation_amount}
    else:
        token = None
        detail = {"param": p.param, "value": p.value.value}
    return {"record": "message", "t": m.t, "sender": m.sender, "receiver": m.receiver,
            "kind": m.kind, "superseded": m.superseded, "token": token, "detail": detail}


def trace_lines(events: Iterable[Event], messages: Iterable[Message] = (),
                decisions: Iterable[Decision] = ()) -> list[str]:
    lines = [_header(TRACE_FORMAT)]
    for e in events:
        lines.append(_line(EVENT_FIELDS, {"record": "event", "seq": e.seq, "t": e.t,
                                          "signal": e.signal, "value": e.value,
                                          "token": e.token}))
    for m in messages:
        lines.append(_line(MESSAGE_FIELDS, _message_record(m)))
    for d in decisions:
        lines.append(_line(DECISION_FIELDS, {
            "record": "decision", "t": d.t, "maker": d.maker, "action": d.action.value,
            "speed": d.speed.value if d.speed else None, "token": d.token}))
    return lines


def write_trace(path: Union[str, Path], events, messages=(), decisions=()):
    Path(path).write_text("\n".join(trace_lines(events, messages, decisions)) + "\n")


def read_trace(path: Union[str, Path]) -> list[Event]:
    """Event records of a trace file, in file order."""
    _, rows = _records(path, TRACE_FORMAT)
    out = []
    for r in rows:
        if r.get("record") != "event":
            continue
        value = r["value"]
        if r["signal"] == "M_S":
            value = SpeedLevel.parse(value)
        out.append(Event(r["t"], r["signal"], value, r["token"], r["seq"]))
    return out
