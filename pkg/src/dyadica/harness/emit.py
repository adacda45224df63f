"""Deterministic report emission: json / csv / text.

Floats are serialized with 17 significant digits ('%.17g'), which
round-trips IEEE doubles exactly; non-finite floats become the strings
"inf", "-inf", "nan" (the documented formatting rule). Field order is
construction order, so identical reports emit identical bytes. Wall time
appears only in the text format.
"""

from __future__ import annotations

import math


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _json_fragments(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            _json_fragments(str(k), out)
            out.append(":")
            _json_fragments(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _json_fragments(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def to_json_bytes(report_dict: dict) -> bytes:
    frags: list = []
    _json_fragments(report_dict, frags)
    return ("".join(frags) + "\n").encode()


def to_csv_bytes(report_dict: dict) -> bytes:
    rows = ["check,passed,value,threshold,samples,skipped"]
    for c in report_dict.get("checks", []):
        thr = c.get("threshold")
        rows.append(
            ",".join(
                [
                    str(c.get("check", c.get("mode", "?"))),
                    str(c.get("passed", "")),
                    _fmt_float(float(c.get("value", c.get("max_ratio", float("nan"))))).strip('"'),
                    "" if thr is None else _fmt_float(float(thr)).strip('"'),
                    str(c.get("samples", "")),
                    str(c.get("skipped", "")),
                ]
            )
        )
    return ("\n".join(rows) + "\n").encode()


def to_text(report_dict: dict, wall_time_s: float | None = None) -> bytes:
    lines = [f"command: {report_dict.get('command', '?')}"]
    for c in report_dict.get("checks", []):
        status = "PASS" if c.get("passed", True) else "FAIL"
        name = c.get("check", c.get("mode", "?"))
        val = c.get("value", c.get("max_ratio"))
        thr = c.get("threshold", c.get("constant"))
        extra = "" if thr is None else f" (threshold {thr})"
        lines.append(f"  [{status}] {name}: {val}{extra}")
    lines.append(f"overall: {'PASS' if report_dict.get('passed', True) else 'FAIL'}")
    if wall_time_s is not None:
        lines.append(f"wall time: {wall_time_s:.3f} s")
    return ("\n".join(lines) + "\n").encode()


def emit(report, fmt: str = "json", include_timings: bool = False) -> bytes:
    d = report.to_dict(include_timings=False) if hasattr(report, "to_dict") else report
    if fmt == "json":
        return to_json_bytes(d)
    if fmt == "csv":
        return to_csv_bytes(d)
    if fmt == "text":
        wt = getattr(report, "wall_time_s", None)
        return to_text(d, wt)
    raise ValueError(f"unknown format {fmt!r}")
