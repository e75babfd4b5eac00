"""Trace CSV / summary JSON writers and the trace CSV reader.

Floats are written with ``repr`` so identical runs give identical bytes.
Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from .radio import Action

CSV_COLUMNS = ["iter", "user", "channel", "power_mw", "sinr_linear", "sinr_db", "utility", "max_omega", "locked"]


class TraceFormatError(ValueError):
    pass


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv_text(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in trace.records:
        sinr_db = r.sinr_db
        for i in range(len(r.channels)):
            w.writerow([
                r.iteration,
                i,
                int(r.channels[i]),
                repr(float(r.powers[i])),
                repr(float(r.sinr[i])),
                repr(float(sinr_db[i])),
                repr(float(r.utility[i])),
                repr(float(r.max_omega[i])),
                int(bool(r.locked[i])),
            ])
    return buf.getvalue()


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_trace(trace, csv_path, summary_path=None, extra_summary=None) -> None:
    atomic_write_text(csv_path, trace_csv_text(trace))
    if summary_path is not None:
        summary = trace.summary()
        if extra_summary:
            summary.update(extra_summary)
        atomic_write_text(summary_path, dumps_json(summary))


def read_trace_rows(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise TraceFormatError(f"trace file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise TraceFormatError(f"unexpected trace header {reader.fieldnames}, expected {CSV_COLUMNS}")
        rows = []
        for n, row in enumerate(reader, start=2):
            try:
                rows.append({
                    "iter": int(row["iter"]),
                    "user": int(row["user"]),
                    "channel": int(row["channel"]),
                    "power_mw": float(row["power_mw"]),
                    "sinr_linear": float(row["sinr_linear"]),
                    "utility": float(row["utility"]),
                    "max_omega": float(row["max_omega"]),
                    "locked": row["locked"] == "1",
                })
            except (TypeError, ValueError) as exc:
                raise TraceFormatError(f"line {n}: {exc}") from None
    if not rows:
        raise TraceFormatError("trace has no rows")
    return rows


def final_profile(path, n_users: int | None = None) -> list[Action]:
    """Joint action recorded in the last iteration of a trace CSV."""
    rows = read_trace_rows(path)
    last = max(r["iter"] for r in rows)
    final = sorted((r for r in rows if r["iter"] == last), key=lambda r: r["user"])
    users = [r["user"] for r in final]
    if users != list(range(len(final))):
        raise TraceFormatError(f"iteration {last} has users {users}, expected 0..{len(final) - 1}")
    if n_users is not None and len(final) != n_users:
        raise TraceFormatError(f"trace has {len(final)} users, scenario has {n_users}")
    return [Action(r["channel"], r["power_mw"]) for r in final]
