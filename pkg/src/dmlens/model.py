"""Canonical in-memory model for target-event traces.

Every other part of the analyzer consumes these types. A trace is a header
(device-slot count, host slot, optional wall time) plus a chronologically
ordered list of events covering four kinds of target activity: data
transfers, device memory allocations/deletions, and kernel executions.

The host is an ordinary device slot identified by ``Trace.host_device``;
there is no special host type. Timestamps are integer nanoseconds from the
trace origin. ``hash == 0`` means "no content hash" -- producers remap a
real hash of 0 to 1 (see :mod:`dmlens.hashing`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

# Device slots are plain non-negative ints, bounded by Trace.num_devices_total.
DeviceNum = int

U64_MAX = 2**64 - 1


class EventKind(Enum):
    TRANSFER = "transfer"
    ALLOC = "alloc"
    DELETE = "delete"
    KERNEL = "kernel"


@dataclass(slots=True)
class CodeLocation:
    """Source attribution for one event: raw return address plus, when debug
    info was available to the producer, a resolved file and line."""

    codeptr: int = 0  # 0 = unknown
    file: Optional[str] = None
    line: Optional[int] = None


@dataclass(slots=True)
class TraceEvent:
    """One timestamped target-related runtime event.

    Field use by kind:

    ============  ==========================  ===========================
    field         Transfer                    Alloc / Delete / Kernel
    ============  ==========================  ===========================
    src_device    sending device              issuing host side (Kernel:
                                              equal to dst_device)
    dst_device    receiving device            device acted on / executing
    src_addr      source buffer address       Alloc: mapped host variable
                                              address; else 0
    dst_addr      destination buffer address  device address (Kernel: 0)
    bytes         payload size                Alloc: allocation size;
                                              else 0
    hash          content hash (0 if none)    0
    ============  ==========================  ===========================
    """

    seq: int
    kind: EventKind
    start_ns: int
    end_ns: int
    src_device: DeviceNum
    dst_device: DeviceNum
    src_addr: int
    dst_addr: int
    bytes: int
    hash: int
    loc: CodeLocation = field(default_factory=CodeLocation)

    def duration_ns(self) -> int:
        return self.end_ns - self.start_ns


@dataclass(slots=True)
class Trace:
    """Header plus chronologically ordered event sequence.

    Events must be sorted by ``(start_ns, seq)`` with seq strictly increasing
    in that order; ``validate`` checks this and everything else the detectors
    rely on. Treat instances as immutable once constructed.
    """

    version: int
    num_devices_total: int  # device slots including the host slot
    host_device: DeviceNum
    wall_time_ns: Optional[int]
    events: list[TraceEvent]

    def wall_time(self) -> int:
        """Wall time from the header, or the event span when absent."""
        if self.wall_time_ns is not None:
            return self.wall_time_ns
        if not self.events:
            return 0
        return max(e.end_ns for e in self.events) - min(e.start_ns for e in self.events)

    def target_devices(self) -> Iterator[DeviceNum]:
        return (d for d in range(self.num_devices_total) if d != self.host_device)


@dataclass(slots=True)
class Violation:
    """One invariant violation found by :func:`validate`; data, not an error."""

    rule: str
    message: str
    seq: Optional[int] = None

    def __str__(self) -> str:
        where = f" (seq {self.seq})" if self.seq is not None else ""
        return f"{self.rule}: {self.message}{where}"


def _check_u64(out: list[Violation], seq: Optional[int], name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= U64_MAX:
        out.append(Violation("field-range", f"{name}={value!r} is not a 64-bit unsigned value", seq))


def validate(trace: Trace) -> list[Violation]:
    """Return every invariant violation in the trace; empty list means valid.

    Does not mutate the trace. Every detector is total on traces this
    function accepts.
    """
    out: list[Violation] = []

    if trace.num_devices_total < 1:
        out.append(Violation("header", f"num_devices_total={trace.num_devices_total} must be positive"))
    if not 0 <= trace.host_device < max(trace.num_devices_total, 1):
        out.append(Violation("header", f"host_device={trace.host_device} out of range"))
    if trace.wall_time_ns is not None:
        _check_u64(out, None, "wall_time_ns", trace.wall_time_ns)

    prev_start = -1
    prev_seq = -1
    ndev = trace.num_devices_total
    u64 = U64_MAX
    transfer, alloc_kind, delete_kind, kernel = (
        EventKind.TRANSFER, EventKind.ALLOC, EventKind.DELETE, EventKind.KERNEL)
    # This pass runs over every event of million-event traces before any
    # detector may: read each attribute once and diagnose only on failure.
    for e in trace.events:
        seq = e.seq
        start = e.start_ns
        end = e.end_ns
        src = e.src_device
        dst = e.dst_device
        nbytes = e.bytes
        hash_value = e.hash
        kind = e.kind
        loc = e.loc

        if not (0 <= seq <= u64 and 0 <= start <= u64 and 0 <= end <= u64
                and 0 <= e.src_addr <= u64 and 0 <= e.dst_addr <= u64
                and 0 <= nbytes <= u64 and 0 <= hash_value <= u64):
            for name in ("seq", "start_ns", "end_ns", "src_addr", "dst_addr", "bytes", "hash"):
                _check_u64(out, seq, name, getattr(e, name))
        if start > end:
            out.append(Violation("interval", f"start_ns {start} > end_ns {end}", seq))
        if not (0 <= src < ndev and 0 <= dst < ndev):
            if not 0 <= src < ndev:
                out.append(Violation("device", f"src_device={src} out of range [0,{ndev})", seq))
            if not 0 <= dst < ndev:
                out.append(Violation("device", f"dst_device={dst} out of range [0,{ndev})", seq))

        if kind is transfer:
            if nbytes > 0 and hash_value == 0:
                out.append(Violation("transfer", "non-empty transfer has no content hash", seq))
        elif kind is alloc_kind:
            if nbytes <= 0:
                out.append(Violation("alloc", "allocation of zero bytes", seq))
            if e.dst_addr == 0:
                out.append(Violation("alloc", "allocation with null device address", seq))
        elif kind is delete_kind:
            if e.dst_addr == 0:
                out.append(Violation("delete", "deletion with null device address", seq))
        elif kind is kernel:
            if src != dst:
                out.append(Violation("kernel", "kernel src_device must equal dst_device", seq))

        line = loc.line
        if loc.file is not None and line is None:
            out.append(Violation("location", "file present but line missing", seq))
        if line is not None and line <= 0:
            out.append(Violation("location", f"line={line} must be positive", seq))

        if start < prev_start or (start == prev_start and seq < prev_seq):
            out.append(Violation("order", "events not sorted by (start_ns, seq)", seq))
        if seq <= prev_seq:
            out.append(Violation("order", "seq values not strictly increasing", seq))
        prev_start = start
        prev_seq = seq

    return out
