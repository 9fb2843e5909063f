"""CSV and JSON formats for paths, traces, curves, fields and level lines.

Every JSON document carries ``schema`` and ``schema_version`` keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .loewner import DrivingPath, SwallowEvent, Trace

__all__ = [
    "CsvFormatError",
    "SCHEMA_VERSION",
    "dump_json",
    "ensemble_from_json",
    "ensemble_to_json",
    "field_header",
    "field_to_csv",
    "level_line_to_csv",
    "path_from_csv",
    "path_from_json",
    "path_to_csv",
    "path_to_json",
    "read_curve",
    "trace_from_csv",
    "trace_from_json",
    "trace_to_csv",
    "trace_to_json",
]

SCHEMA_VERSION = 1


class CsvFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None, source: str | None = None):
        where = f"{source or '<csv>'}:{row}" if row is not None else (source or "<csv>")
        super().__init__(f"{where}: {message}")
        self.row = row


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_json(obj, path: str | Path | None = None) -> str:
    """Deterministic JSON (sorted keys, fixed indentation); optionally written to ``path``."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _read_rows(text: str, source: str | None) -> tuple[list[str], list[tuple[int, list[str]]]]:
    reader = csv.reader(io.StringIO(text))
    rows = [(i + 1, r) for i, r in enumerate(reader) if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvFormatError("empty file", source=source)
    header = [c.strip() for c in rows[0][1]]
    return header, rows[1:]


def _floats(row: list[str], width: int, lineno: int, source: str | None) -> list[float]:
    if len(row) != width:
        raise CsvFormatError(f"expected {width} columns, found {len(row)}", lineno, source)
    try:
        return [float(c) for c in row]
    except ValueError as exc:
        raise CsvFormatError(f"non-numeric value ({exc})", lineno, source) from None


def path_to_csv(path: DrivingPath) -> str:
    m = 0 if path.force_tracks is None else path.force_tracks.shape[0]
    lines = [",".join(["t", "W"] + [f"X_{j + 1}" for j in range(m)])]
    for i in range(len(path)):
        vals = [path.times[i], path.values[i]] + ([] if m == 0 else list(path.force_tracks[:, i]))
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def path_from_csv(text: str, source: str | None = None) -> DrivingPath:
    header, rows = _read_rows(text, source)
    if header[:2] != ["t", "W"] or any(not h.startswith("X_") for h in header[2:]):
        raise CsvFormatError("header must be t,W[,X_1,...]", 1, source)
    data = np.array([_floats(r, len(header), n, source) for n, r in rows])
    if data.size == 0:
        raise CsvFormatError("no data rows", source=source)
    tracks = data[:, 2:].T if len(header) > 2 else None
    try:
        return DrivingPath(data[:, 0], data[:, 1], tracks)
    except ValueError as exc:
        raise CsvFormatError(str(exc), source=source) from None


def _event_dict(e: SwallowEvent) -> dict:
    return {"time": e.time, "index": e.index, "position": e.position}


def _path_dict(path: DrivingPath) -> dict:
    d = {"times": path.times.tolist(), "W": path.values.tolist()}
    if path.force_tracks is not None:
        d["force_tracks"] = [[None if math.isnan(v) else v for v in row] for row in path.force_tracks.tolist()]
    if path.events:
        d["events"] = [_event_dict(e) for e in path.events]
    return d


def _path_from_dict(d: dict) -> DrivingPath:
    tracks = d.get("force_tracks")
    if tracks is not None:
        tracks = np.array([[np.nan if v is None else v for v in row] for row in tracks], dtype=float)
    events = tuple(SwallowEvent(e["time"], e["index"], e["position"]) for e in d.get("events", []))
    return DrivingPath(np.array(d["times"]), np.array(d["W"]), tracks, events)


def _check_schema(doc: dict, name: str):
    if doc.get("schema") != name:
        raise ValueError(f"expected schema {name!r}, found {doc.get('schema')!r}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")


def path_to_json(path: DrivingPath) -> dict:
    return {"schema": "driving_path", "schema_version": SCHEMA_VERSION, **_path_dict(path)}


def path_from_json(doc: dict) -> DrivingPath:
    _check_schema(doc, "driving_path")
    return _path_from_dict(doc)


def ensemble_to_json(paths: Sequence[DrivingPath], metadata: dict | None = None) -> dict:
    return {
        "schema": "driving_ensemble",
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata or {},
        "paths": [_path_dict(p) for p in paths],
    }


def ensemble_from_json(doc: dict) -> list[DrivingPath]:
    _check_schema(doc, "driving_ensemble")
    return [_path_from_dict(d) for d in doc["paths"]]


def trace_to_csv(trace: Trace) -> str:
    lines = ["t,re,im"]
    lines += [f"{_fmt(t)},{_fmt(z.real)},{_fmt(z.imag)}" for t, z in zip(trace.times, trace.points)]
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str, source: str | None = None) -> Trace:
    header, rows = _read_rows(text, source)
    if header != ["t", "re", "im"]:
        raise CsvFormatError("header must be t,re,im", 1, source)
    data = np.array([_floats(r, 3, n, source) for n, r in rows])
    if data.size == 0:
        raise CsvFormatError("no data rows", source=source)
    try:
        return Trace(data[:, 0], data[:, 1] + 1j * data[:, 2])
    except ValueError as exc:
        raise CsvFormatError(str(exc), source=source) from None


def trace_to_json(trace: Trace) -> dict:
    return {
        "schema": "trace",
        "schema_version": SCHEMA_VERSION,
        "times": trace.times.tolist(),
        "re": trace.points.real.tolist(),
        "im": trace.points.imag.tolist(),
    }


def trace_from_json(doc: dict) -> Trace:
    _check_schema(doc, "trace")
    return Trace(np.array(doc["times"]), np.array(doc["re"]) + 1j * np.array(doc["im"]))


def read_curve(path: str | Path) -> np.ndarray:
    """Curve points from a trace CSV/JSON file (times are ignored)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return trace_from_json(json.loads(text)).points
    return trace_from_csv(text, source=str(path)).points


def level_line_to_csv(curve: Iterable[complex]) -> str:
    """Trace-compatible CSV; the ``t`` column holds the step index."""
    pts = np.asarray(list(curve), dtype=complex)
    return trace_to_csv(Trace(np.arange(pts.size, dtype=float), pts))


def field_to_csv(sample) -> str:
    dom = sample.domain
    lines = ["a,b,x,y,boundary,harmonic,fluctuation,total"]
    total = sample.total
    for i in range(dom.size):
        lines.append(
            ",".join(
                [
                    str(int(dom.a[i])),
                    str(int(dom.b[i])),
                    _fmt(dom.z[i].real),
                    _fmt(dom.z[i].imag),
                    str(int(dom.is_boundary[i])),
                    _fmt(sample.harmonic_part[i]),
                    _fmt(sample.fluctuation[i]),
                    _fmt(total[i]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def field_header(sample) -> dict:
    bc = sample.boundary
    return {
        "schema": "field_sample",
        "schema_version": SCHEMA_VERSION,
        "R": sample.domain.radius,
        "g": None if bc is None else bc.g,
        "jumps": [] if bc is None else [list(j) for j in bc.jumps],
        "kappa_lat": sample.kappa_lat,
        "seed": sample.seed,
        "index": sample.index,
        "n_sites": sample.domain.size,
    }
