"""On-disk trace format: newline-delimited JSON, one object per line.

Line 1 (after any leading ``#`` comments) is the header; every later
non-comment line is one event. Field names are part of the wire contract:

header::

    {"dmlens":1,"num_devices":<int>,"host_device":<int>,"wall_time_ns":<int?>}

event::

    {"seq":<int>,"kind":"transfer"|"alloc"|"delete"|"kernel",
     "t0":<int>,"t1":<int>,"src_dev":<int>,"dst_dev":<int>,
     "src_addr":<int>,"dst_addr":<int>,"bytes":<int>,"hash":<int>,
     "codeptr":<int>,"file":<string?>,"line":<int?>}

Unknown fields are ignored for forward compatibility; missing required
fields are malformed. Events may appear in any order in the file; parsing
re-sorts by ``(t0, seq)``. An event with ``t1 < t0`` is a hard parse error
(a producer that emits one is broken and would poison the timing sweeps).
If the header has no ``wall_time_ns``, it is derived once at parse time as
the event span and stored on the returned Trace.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Optional, Union

from .model import U64_MAX, CodeLocation, EventKind, Trace, TraceEvent, Violation, validate

FORMAT_VERSION = 1

_KIND_FROM_WIRE = {k.value: k for k in EventKind}

_EVENT_REQUIRED = (
    "seq", "kind", "t0", "t1", "src_dev", "dst_dev",
    "src_addr", "dst_addr", "bytes", "hash", "codeptr",
)


class TraceIOError(Exception):
    """Base class for everything parse_trace/serialize_trace can raise."""


class MalformedRecord(TraceIOError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class MissingHeader(TraceIOError):
    def __init__(self, detail: str = "first non-comment line must be the trace header"):
        super().__init__(detail)


class UnsupportedVersion(TraceIOError):
    def __init__(self, version: object):
        super().__init__(f"unsupported trace format version {version!r} (supported: {FORMAT_VERSION})")
        self.version = version


class InvariantViolation(TraceIOError):
    def __init__(self, violations: list[Violation]):
        lines = "; ".join(str(v) for v in violations[:10])
        more = f" (+{len(violations) - 10} more)" if len(violations) > 10 else ""
        super().__init__(f"trace violates model invariants: {lines}{more}")
        self.violations = violations


class InvalidTrace(TraceIOError):
    def __init__(self, violations: list[Violation]):
        super().__init__(f"refusing to serialize invalid trace ({len(violations)} violations)")
        self.violations = violations


def _require_u64(obj: dict, key: str, line_no: int) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord(line_no, f'field "{key}" must be an integer, got {value!r}')
    if not 0 <= value <= U64_MAX:
        raise MalformedRecord(line_no, f'field "{key}"={value} outside 64-bit unsigned range')
    return value


def _parse_header(obj: dict, line_no: int) -> Trace:
    version = obj["dmlens"]
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(version)
    num_devices = _require_u64(obj, "num_devices", line_no)
    host_device = _require_u64(obj, "host_device", line_no)
    wall: Optional[int] = None
    if "wall_time_ns" in obj:
        wall = _require_u64(obj, "wall_time_ns", line_no)
    return Trace(version=version, num_devices_total=num_devices,
                 host_device=host_device, wall_time_ns=wall, events=[])


def _parse_event(obj: dict, line_no: int, loc_cache: dict) -> TraceEvent:
    for key in _EVENT_REQUIRED:
        if key not in obj:
            raise MalformedRecord(line_no, f'missing required field "{key}"')
    kind_str = obj["kind"]
    kind = _KIND_FROM_WIRE.get(kind_str)
    if kind is None:
        raise MalformedRecord(line_no, f'unknown event kind {kind_str!r}')
    t0 = _require_u64(obj, "t0", line_no)
    t1 = _require_u64(obj, "t1", line_no)
    if t1 < t0:
        raise MalformedRecord(line_no, f"event interval inverted (t1 {t1} < t0 {t0})")

    file = obj.get("file")
    line = obj.get("line")
    if file is not None and not isinstance(file, str):
        raise MalformedRecord(line_no, f'field "file" must be a string, got {file!r}')
    if line is not None:
        if isinstance(line, bool) or not isinstance(line, int) or line <= 0:
            raise MalformedRecord(line_no, f'field "line" must be a positive integer, got {line!r}')
    if file is not None and line is None:
        raise MalformedRecord(line_no, 'field "file" present without "line"')

    codeptr = _require_u64(obj, "codeptr", line_no)
    # Distinct locations are few; share one CodeLocation per (codeptr, file, line).
    loc_key = (codeptr, file, line)
    loc = loc_cache.get(loc_key)
    if loc is None:
        loc = loc_cache[loc_key] = CodeLocation(codeptr=codeptr, file=file, line=line)

    return TraceEvent(
        seq=_require_u64(obj, "seq", line_no),
        kind=kind,
        start_ns=t0,
        end_ns=t1,
        src_device=_require_u64(obj, "src_dev", line_no),
        dst_device=_require_u64(obj, "dst_dev", line_no),
        src_addr=_require_u64(obj, "src_addr", line_no),
        dst_addr=_require_u64(obj, "dst_addr", line_no),
        bytes=_require_u64(obj, "bytes", line_no),
        hash=_require_u64(obj, "hash", line_no),
        loc=loc,
    )


def _iter_lines(data: Union[bytes, str, IO[bytes], IO[str]]) -> Iterable[str]:
    if hasattr(data, "read"):
        data = data.read()  # type: ignore[union-attr]
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.split("\n")


def parse_trace(data: Union[bytes, str, IO[bytes], IO[str]]) -> Trace:
    """Parse a trace file into a validated Trace.

    Accepts bytes, text, or a readable file object. Raises MissingHeader,
    UnsupportedVersion, MalformedRecord, or InvariantViolation; never
    returns an invalid Trace.
    """
    trace: Optional[Trace] = None
    events: list[TraceEvent] = []
    loc_cache: dict = {}
    for line_no, raw in enumerate(_iter_lines(data), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise MalformedRecord(line_no, "record is not a JSON object")
        if trace is None:
            if "dmlens" not in obj:
                raise MissingHeader()
            trace = _parse_header(obj, line_no)
        else:
            events.append(_parse_event(obj, line_no, loc_cache))

    if trace is None:
        raise MissingHeader("empty input: no header line found")

    events.sort(key=lambda e: (e.start_ns, e.seq))
    trace.events = events
    if trace.wall_time_ns is None:
        trace.wall_time_ns = trace.wall_time()

    violations = validate(trace)
    if violations:
        raise InvariantViolation(violations)
    return trace


def _event_record(e: TraceEvent) -> dict:
    rec = {
        "seq": e.seq,
        "kind": e.kind.value,
        "t0": e.start_ns,
        "t1": e.end_ns,
        "src_dev": e.src_device,
        "dst_dev": e.dst_device,
        "src_addr": e.src_addr,
        "dst_addr": e.dst_addr,
        "bytes": e.bytes,
        "hash": e.hash,
        "codeptr": e.loc.codeptr,
    }
    if e.loc.file is not None:
        rec["file"] = e.loc.file
        rec["line"] = e.loc.line
    return rec


def serialize_trace(trace: Trace) -> bytes:
    """Serialize a valid trace to its canonical byte form (UTF-8, LF lines).

    Raises InvalidTrace when the trace fails validation; parse_trace on the
    output yields a field-by-field equal Trace.
    """
    violations = validate(trace)
    if trace.version != FORMAT_VERSION:
        violations.append(Violation("header", f"version={trace.version} is not serializable as format {FORMAT_VERSION}"))
    if violations:
        raise InvalidTrace(violations)

    header: dict = {
        "dmlens": trace.version,
        "num_devices": trace.num_devices_total,
        "host_device": trace.host_device,
    }
    if trace.wall_time_ns is not None:
        header["wall_time_ns"] = trace.wall_time_ns

    out = [json.dumps(header, separators=(",", ":"))]
    out.extend(json.dumps(_event_record(e), separators=(",", ":")) for e in trace.events)
    out.append("")  # terminating newline
    return "\n".join(out).encode("utf-8")


def load_trace_file(path) -> Trace:
    with open(path, "rb") as fh:
        return parse_trace(fh)


def write_trace_file(path, trace: Trace) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_trace(trace))
