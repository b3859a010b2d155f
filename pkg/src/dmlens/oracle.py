"""Brute-force reference implementations of the four inefficiency
definitions, used to cross-check the detectors.

These restate what each pattern *means*, quantifying over whole event sets
with no sweeps, queues, or shared helper code (result dataclasses aside).
They are quadratic or worse on purpose; differential tests compare their
output with the detectors' as sets of event seqs.
"""

from __future__ import annotations

from .detectors import DuplicateGroup, Findings, RepeatedAllocGroup, RoundTripGroup
from .model import EventKind, Trace, TraceEvent
from .prep import AllocPair


def _hashed_transfers(trace: Trace) -> list[TraceEvent]:
    return [e for e in trace.events
            if e.kind is EventKind.TRANSFER and e.bytes > 0 and e.hash != 0]


def _data_ops(trace: Trace) -> list[TraceEvent]:
    wanted = (EventKind.TRANSFER, EventKind.ALLOC, EventKind.DELETE)
    return [e for e in trace.events if e.kind in wanted]


def _pair_allocs(trace: Trace) -> list[AllocPair]:
    """Stack simulation per (device, address): a delete closes the most
    recent open allocation there; still-open allocations close at the end of
    all data-op activity via a flagged synthetic delete."""
    ops = _data_ops(trace)
    trace_end = max((e.end_ns for e in ops), default=0)
    stacks: dict[tuple[int, int], list[TraceEvent]] = {}
    pairs: list[AllocPair] = []
    for e in ops:
        if e.kind is EventKind.ALLOC:
            stacks.setdefault((e.dst_device, e.dst_addr), []).append(e)
        elif e.kind is EventKind.DELETE:
            stack = stacks.get((e.dst_device, e.dst_addr))
            if stack:
                pairs.append(AllocPair(stack.pop(), e))
    for stack in stacks.values():
        for alloc in stack:
            synthetic = TraceEvent(
                seq=alloc.seq, kind=EventKind.DELETE,
                start_ns=trace_end, end_ns=trace_end,
                src_device=alloc.src_device, dst_device=alloc.dst_device,
                src_addr=0, dst_addr=alloc.dst_addr, bytes=0, hash=0, loc=alloc.loc,
            )
            pairs.append(AllocPair(alloc, synthetic, synthetic_delete=True))
    pairs.sort(key=lambda p: (p.alloc_event.start_ns, p.alloc_event.seq))
    return pairs


def _kernels_on(trace: Trace, device: int) -> list[TraceEvent]:
    return [e for e in trace.events if e.kind is EventKind.KERNEL and e.dst_device == device]


def oracle_duplicates(trace: Trace) -> list[DuplicateGroup]:
    """Def: a device received content it had previously received. Pairwise:
    a transfer is in a group iff some other transfer shares its
    (hash, receiving device)."""
    transfers = _hashed_transfers(trace)
    groups: list[DuplicateGroup] = []
    seen: set[tuple[int, int]] = set()
    for e in transfers:
        key = (e.hash, e.dst_device)
        if key in seen:
            continue
        matches = [f for f in transfers if f.hash == e.hash and f.dst_device == e.dst_device]
        if len(matches) >= 2:
            groups.append(DuplicateGroup(hash=e.hash, dest_device=e.dst_device, events=matches))
        seen.add(key)
    groups.sort(key=lambda g: (g.events[0].start_ns, g.hash, g.dest_device))
    return groups


def oracle_round_trips(trace: Trace) -> list[RoundTripGroup]:
    """Def: a device sent content away and later received it back
    unmodified. Greedy: each tx takes the earliest not-yet-consumed
    reception of its hash at its source device that comes strictly after tx
    in trace order; every reception completes at most one trip."""
    transfers = _hashed_transfers(trace)
    consumed: set[int] = set()
    grouped: dict[tuple[int, int, int], list[tuple[TraceEvent, TraceEvent]]] = {}
    for tx in transfers:
        candidates = [
            rx for rx in transfers
            if rx.hash == tx.hash
            and rx.dst_device == tx.src_device
            and (rx.start_ns, rx.seq) > (tx.start_ns, tx.seq)
            and rx.seq not in consumed
        ]
        if not candidates:
            continue
        rx = min(candidates, key=lambda e: (e.start_ns, e.seq))
        consumed.add(rx.seq)
        grouped.setdefault((tx.hash, tx.src_device, tx.dst_device), []).append((tx, rx))
    groups = [
        RoundTripGroup(hash=k[0], src_device=k[1], dest_device=k[2], trips=pairs)
        for k, pairs in grouped.items()
    ]
    groups.sort(key=lambda g: (g.trips[0][0].start_ns, g.hash, g.src_device, g.dest_device))
    return groups


def oracle_repeated_allocs(trace: Trace) -> list[RepeatedAllocGroup]:
    """Def: the same variable (host address, device, size) was allocated and
    deleted more than once."""
    pairs = _pair_allocs(trace)
    groups: list[RepeatedAllocGroup] = []
    seen: set[tuple[int, int, int]] = set()
    for pair in pairs:
        a = pair.alloc_event
        key = (a.src_addr, a.dst_device, a.bytes)
        if key in seen:
            continue
        seen.add(key)
        matches = [p for p in pairs
                   if p.alloc_event.src_addr == key[0]
                   and p.alloc_event.dst_device == key[1]
                   and p.alloc_event.bytes == key[2]]
        if len(matches) >= 2:
            groups.append(RepeatedAllocGroup(host_addr=key[0], tgt_device=key[1],
                                             bytes=key[2], pairs=matches))
    groups.sort(key=lambda g: (g.pairs[0].alloc_event.start_ns, g.host_addr, g.tgt_device, g.bytes))
    return groups


def oracle_unused_allocs(trace: Trace) -> list[AllocPair]:
    """Def (timing approximation): an allocation on a target device whose
    lifetime intersects no kernel interval on that device. Exhaustive
    interval check against every kernel."""
    unused = [
        pair for pair in _pair_allocs(trace)
        if pair.alloc_event.dst_device != trace.host_device
        and not any(
            k.start_ns <= pair.delete_event.end_ns and k.end_ns >= pair.alloc_event.start_ns
            for k in _kernels_on(trace, pair.alloc_event.dst_device)
        )
    ]
    unused.sort(key=lambda p: (p.alloc_event.start_ns, p.alloc_event.seq))
    return unused


def oracle_unused_transfers(trace: Trace) -> list[TraceEvent]:
    """A transfer to a target device is unused when it occurs after every
    kernel on that device has ended, or when it sits in a gap between
    kernels and a later transfer to the same device from the same source
    address overwrites it within that gap (no kernel ends in between, and
    neither endpoint transfer coincides with a running kernel)."""
    transfers = [e for e in trace.events
                 if e.kind is EventKind.TRANSFER and e.dst_device != trace.host_device]
    unused: list[TraceEvent] = []
    for tx in transfers:
        kernels = _kernels_on(trace, tx.dst_device)
        if all(k.end_ns < tx.start_ns for k in kernels):
            unused.append(tx)
            continue
        if any(k.start_ns <= tx.start_ns <= k.end_ns for k in kernels):
            continue
        overwritten = any(
            ty.dst_device == tx.dst_device
            and ty.src_addr == tx.src_addr
            and (ty.start_ns, ty.seq) > (tx.start_ns, tx.seq)
            and not any(tx.start_ns <= k.end_ns < ty.start_ns for k in kernels)
            and not any(k.start_ns <= ty.start_ns <= k.end_ns for k in kernels)
            for ty in transfers
        )
        if overwritten:
            unused.append(tx)
    unused.sort(key=lambda e: (e.start_ns, e.seq))
    return unused


def oracle_findings(trace: Trace) -> Findings:
    return Findings(
        duplicates=oracle_duplicates(trace),
        round_trips=oracle_round_trips(trace),
        repeated_allocs=oracle_repeated_allocs(trace),
        unused_allocs=oracle_unused_allocs(trace),
        unused_transfers=oracle_unused_transfers(trace),
    )


def _seq_sets(findings: Findings) -> dict[str, object]:
    return {
        "duplicates": {(g.hash, g.dest_device, tuple(e.seq for e in g.events))
                       for g in findings.duplicates},
        "round_trips": {(tx.seq, rx.seq) for g in findings.round_trips for tx, rx in g.trips},
        "repeated_allocs": {
            (g.host_addr, g.tgt_device, g.bytes,
             tuple(p.alloc_event.seq for p in g.pairs))
            for g in findings.repeated_allocs
        },
        "unused_allocs": {p.alloc_event.seq for p in findings.unused_allocs},
        "unused_transfers": {e.seq for e in findings.unused_transfers},
    }


def diff_findings(detected: Findings, reference: Findings) -> list[str]:
    """Compare detector output with oracle output as seq sets; one message
    per diverging category, empty when they agree."""
    left = _seq_sets(detected)
    right = _seq_sets(reference)
    diffs = []
    for category in left:
        if left[category] != right[category]:
            diffs.append(
                f"{category}: detector {sorted(map(repr, left[category]))} "  # type: ignore[arg-type]
                f"!= oracle {sorted(map(repr, right[category]))}"
            )
    return diffs
