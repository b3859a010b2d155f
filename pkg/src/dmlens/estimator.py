"""Optimization-potential estimation: eliminable time and predicted speedup.

The prediction subtracts, from the total execution time, the time spent on
events the findings deem removable, and reports wall / (wall - eliminated).
Which events count as removable per category:

- duplicates: every transfer after the first in a group (the first delivery
  is necessary by definition);
- round trips: the return leg only -- a redundant re-send of the same bytes
  is independently a duplicate, and the cross-category union below keeps
  the two from double counting;
- repeated allocations: alloc and delete of every pair after the first;
- unused allocations: alloc and delete of every reported pair;
- unused transfers: the transfer itself.

Synthetic trace-end deletes are not real events and contribute nothing.
The arithmetic assumes fully synchronous, serialized data operations; a
trace with overlapping event intervals gets a "potentially unreliable"
warning since removing an overlapped operation need not shorten the
critical path proportionally.
"""

from __future__ import annotations

from dataclasses import dataclass

from .detectors import Findings
from .model import Trace

CATEGORIES = ("DD", "RT", "RA", "UA", "UT")

INFINITE_SPEEDUP = float("inf")


class FindingsTraceMismatch(Exception):
    def __init__(self, seq: int):
        super().__init__(f"findings reference event seq {seq} absent from the trace")
        self.seq = seq


@dataclass(slots=True)
class SavingsEstimate:
    per_category_ns: dict[str, int]
    union_ns: int
    wall_time_ns: int
    predicted_speedup: float
    eliminable_seqs: frozenset[int]
    warnings: tuple[str, ...]


def _has_overlaps(trace: Trace) -> bool:
    frontier = -1
    for e in trace.events:  # sorted by start_ns
        if e.start_ns < frontier:
            return True
        if e.end_ns > frontier:
            frontier = e.end_ns
    return False


def estimate(trace: Trace, findings: Findings) -> SavingsEstimate:
    """Turn findings into per-category and union eliminable nanoseconds plus
    a predicted whole-program speedup.

    Raises FindingsTraceMismatch if the findings reference an event seq the
    trace does not contain.
    """
    known_seqs = {e.seq for e in trace.events}
    warnings: list[str] = []

    def checked(event) -> tuple[int, int]:
        if event.seq not in known_seqs:
            raise FindingsTraceMismatch(event.seq)
        return (event.seq, event.end_ns - event.start_ns)

    per_category_events: dict[str, dict[int, int]] = {c: {} for c in CATEGORIES}

    dd = per_category_events["DD"]
    for group in findings.duplicates:
        for event in group.events:
            checked(event)
        for event in group.events[1:]:
            seq, dur = checked(event)
            dd[seq] = dur

    rt = per_category_events["RT"]
    for group in findings.round_trips:
        for tx, rx in group.trips:
            checked(tx)
            seq, dur = checked(rx)
            rt[seq] = dur

    def add_pair(bucket: dict[int, int], pair) -> None:
        seq, dur = checked(pair.alloc_event)
        bucket[seq] = dur
        if not pair.synthetic_delete:
            seq, dur = checked(pair.delete_event)
            bucket[seq] = dur

    ra = per_category_events["RA"]
    for group in findings.repeated_allocs:
        add_pair({}, group.pairs[0])  # membership check only; first pair is necessary
        for pair in group.pairs[1:]:
            add_pair(ra, pair)

    ua = per_category_events["UA"]
    for pair in findings.unused_allocs:
        add_pair(ua, pair)

    ut = per_category_events["UT"]
    for event in findings.unused_transfers:
        seq, dur = checked(event)
        ut[seq] = dur

    per_category_ns = {c: sum(buckets.values()) for c, buckets in per_category_events.items()}

    union: dict[int, int] = {}
    for buckets in per_category_events.values():
        union.update(buckets)
    union_ns = sum(union.values())

    wall = trace.wall_time()
    if union_ns > wall:
        warnings.append(
            f"eliminable time {union_ns} ns exceeds wall time {wall} ns; clamped to wall time")
        union_ns = wall
    if union_ns < 0:  # unreachable with valid traces; keep the clamp total
        warnings.append("negative eliminable time clamped to 0")
        union_ns = 0

    if union_ns == 0:
        speedup = 1.0
    elif union_ns == wall:
        warnings.append("eliminable time equals wall time; predicted speedup is unbounded")
        speedup = INFINITE_SPEEDUP
    else:
        speedup = wall / (wall - union_ns)

    if _has_overlaps(trace):
        warnings.append(
            "trace contains overlapping event intervals; savings assume serialized "
            "operations and may be unreliable")

    return SavingsEstimate(
        per_category_ns=per_category_ns,
        union_ns=union_ns,
        wall_time_ns=wall,
        predicted_speedup=speedup,
        eliminable_seqs=frozenset(union),
        warnings=tuple(warnings),
    )
