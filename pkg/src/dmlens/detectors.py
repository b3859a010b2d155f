"""The five detection passes over a target-event trace.

Four inefficiency families are covered: duplicate transfers (a device
receiving byte-identical content it already received), round-trip transfers
(content sent away and later received back unmodified), repeated device
memory allocations (alloc/delete cycles for the same mapped variable), and
unused mappings, split into allocations whose lifetime intersects no kernel
and transfers that are overwritten before any kernel could read them or
that land after the last kernel on the receiving device.

Content identity is hash-based throughout: two transfers carry the same
data iff they carry the same 64-bit content hash (collisions are assumed
away; the audit facility in :mod:`dmlens.hashing` can verify that on a
concrete run). Unused-mapping detection is deliberately conservative: it
flags only mappings that *cannot possibly* have been used, given kernel
timing -- it does not track individual memory accesses.

All detectors are pure functions of their inputs and emit results in a
deterministic order (by first-event start time, then key); map iteration
order never leaks into output.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .model import DeviceNum, EventKind, Trace, TraceEvent, validate
from .prep import AllocPair, WarnFn, get_alloc_delete_pairs, sort_by_device


@dataclass(slots=True)
class DuplicateGroup:
    """All transfers (>= 2, chronological) delivering one content hash to
    one device. The first member is the necessary original; the repeats are
    the redundancy."""

    hash: int
    dest_device: DeviceNum
    events: list[TraceEvent]


@dataclass(slots=True)
class RoundTripGroup:
    """(tx, rx) pairs where tx sent this hash from src to dest and rx later
    delivered the same hash back to src."""

    hash: int
    src_device: DeviceNum
    dest_device: DeviceNum
    trips: list[tuple[TraceEvent, TraceEvent]]


@dataclass(slots=True)
class RepeatedAllocGroup:
    """Alloc/delete pairs (>= 2) sharing host address, target device, and
    size -- the same variable mapped over and over."""

    host_addr: int
    tgt_device: DeviceNum
    bytes: int
    pairs: list[AllocPair]


@dataclass(slots=True)
class Findings:
    duplicates: list[DuplicateGroup] = field(default_factory=list)
    round_trips: list[RoundTripGroup] = field(default_factory=list)
    repeated_allocs: list[RepeatedAllocGroup] = field(default_factory=list)
    unused_allocs: list[AllocPair] = field(default_factory=list)
    unused_transfers: list[TraceEvent] = field(default_factory=list)

    def total_count(self) -> int:
        return (len(self.duplicates) + len(self.round_trips) + len(self.repeated_allocs)
                + len(self.unused_allocs) + len(self.unused_transfers))


class InvalidTrace(Exception):
    def __init__(self, violations):
        super().__init__(f"trace fails validation with {len(violations)} violations")
        self.violations = violations


def find_duplicate_transfers(data_op_events: Sequence[TraceEvent]) -> list[DuplicateGroup]:
    """Group transfers by (content hash, receiving device); report every key
    received at least twice, including the first occurrence."""
    received: dict[tuple[int, DeviceNum], list[TraceEvent]] = {}
    for event in data_op_events:
        key = (event.hash, event.dst_device)
        bucket = received.get(key)
        if bucket is None:
            received[key] = [event]
        else:
            bucket.append(event)

    groups = [
        DuplicateGroup(hash=key[0], dest_device=key[1], events=events)
        for key, events in received.items()
        if len(events) >= 2
    ]
    groups.sort(key=lambda g: (g.events[0].start_ns, g.hash, g.dest_device))
    return groups


def find_round_trips(
    data_op_events: Sequence[TraceEvent],
    strict_pseudocode: bool = False,
) -> list[RoundTripGroup]:
    """Match each transfer tx against a later reception of the same hash at
    tx's source device.

    Receptions are queued per (hash, receiving device) in chronological
    order. For each tx whose source device has a pending reception of tx's
    hash, a (tx, rx) pair is recorded under (hash, tx.src, tx.dst).

    The default matching adds two guards to the bare queue discipline:
    receptions that do not come strictly after tx in trace order are
    discarded before pairing (data cannot return before it was sent), and a
    paired reception is consumed so every rx completes at most one trip.
    Consumption also covers the self-removal step of the unguarded scheme
    below -- a transfer that is strictly before every tx that could pair it
    can never be picked as anyone's return leg.

    ``strict_pseudocode`` instead pairs with an unguarded peek of the
    reception queue and drops the head of the (hash, tx.dst) queue --
    nominally tx itself -- after each match. That scheme admits temporally
    inverted pairs and can reuse one reception for several trips; it exists
    for fidelity experiments only.
    """
    received: dict[tuple[int, DeviceNum], deque[TraceEvent]] = {}
    for event in data_op_events:
        key = (event.hash, event.dst_device)
        q = received.get(key)
        if q is None:
            received[key] = deque((event,))
        else:
            q.append(event)

    trips: dict[tuple[int, DeviceNum, DeviceNum], list[tuple[TraceEvent, TraceEvent]]] = {}
    for tx in data_op_events:
        q = received.get((tx.hash, tx.src_device))
        if not q:
            continue
        if strict_pseudocode:
            rx = q[0]
        else:
            tx_order = (tx.start_ns, tx.seq)
            while q and (q[0].start_ns, q[0].seq) <= tx_order:
                q.popleft()
            if not q:
                continue
            rx = q.popleft()
        trip_key = (tx.hash, tx.src_device, tx.dst_device)
        trips.setdefault(trip_key, []).append((tx, rx))
        if strict_pseudocode:
            # Avoid counting tx as the completing leg of another trip.
            own = received.get((tx.hash, tx.dst_device))
            if own:
                own.popleft()

    groups = [
        RoundTripGroup(hash=k[0], src_device=k[1], dest_device=k[2], trips=pairs)
        for k, pairs in trips.items()
    ]
    groups.sort(key=lambda g: (g.trips[0][0].start_ns, g.hash, g.src_device, g.dest_device))
    return groups


def _group_alloc_pairs(pairs: Sequence[AllocPair]) -> list[RepeatedAllocGroup]:
    grouped: dict[tuple[int, DeviceNum, int], list[AllocPair]] = {}
    for pair in pairs:
        a = pair.alloc_event
        grouped.setdefault((a.src_addr, a.dst_device, a.bytes), []).append(pair)
    groups = [
        RepeatedAllocGroup(host_addr=k[0], tgt_device=k[1], bytes=k[2], pairs=ps)
        for k, ps in grouped.items()
        if len(ps) >= 2
    ]
    groups.sort(key=lambda g: (g.pairs[0].alloc_event.start_ns, g.host_addr, g.tgt_device, g.bytes))
    return groups


def find_repeated_allocs(
    data_op_events: Sequence[TraceEvent],
    warn: Optional[WarnFn] = None,
) -> list[RepeatedAllocGroup]:
    """Pair allocations with deletions, group by (host address, device,
    size), and report keys allocated more than once. Size is part of the key
    so one address reused for different variables is not a false positive."""
    return _group_alloc_pairs(get_alloc_delete_pairs(data_op_events, warn=warn))


def _unused_allocs_from_pairs(
    tgt_events: Sequence[TraceEvent],
    pairs: Sequence[AllocPair],
    num_devices_total: int,
) -> list[AllocPair]:
    device_tgt = sort_by_device(tgt_events, num_devices_total, key="dst")
    device_pairs: list[list[AllocPair]] = [[] for _ in range(num_devices_total)]
    for pair in pairs:
        device_pairs[pair.alloc_event.dst_device].append(pair)

    unused: list[AllocPair] = []
    for dev in range(num_devices_total):
        kernels = device_tgt[dev]
        n_kernels = len(kernels)
        tgt_idx = 0
        for pair in device_pairs[dev]:
            start = pair.alloc_event.start_ns
            while tgt_idx < n_kernels and kernels[tgt_idx].end_ns < start:
                tgt_idx += 1
            if tgt_idx == n_kernels or kernels[tgt_idx].start_ns > pair.delete_event.end_ns:
                unused.append(pair)
    unused.sort(key=lambda p: (p.alloc_event.start_ns, p.alloc_event.seq))
    return unused


def find_unused_allocs(
    tgt_events: Sequence[TraceEvent],
    data_op_events: Sequence[TraceEvent],
    num_devices_total: int,
    warn: Optional[WarnFn] = None,
) -> list[AllocPair]:
    """Report alloc/delete pairs whose lifetime [alloc start, delete end]
    intersects no kernel interval on the same device, via one forward sweep
    per device (the kernel cursor only moves forward)."""
    pairs = get_alloc_delete_pairs(data_op_events, warn=warn)
    return _unused_allocs_from_pairs(tgt_events, pairs, num_devices_total)


def find_unused_transfers(
    tgt_events: Sequence[TraceEvent],
    data_op_events: Sequence[TraceEvent],
    num_devices_total: int,
) -> list[TraceEvent]:
    """Report transfers that occur after the last kernel on their receiving
    device, and transfers overwritten in place before any kernel ran.

    Per device, a candidates map remembers the last transfer per source
    address seen in the current kernel gap; a same-address successor proves
    the candidate was overwritten unread. Advancing past a kernel or hitting
    a transfer that overlaps a running kernel clears the candidates, since
    that kernel may have consumed them.
    """
    device_tgt = sort_by_device(tgt_events, num_devices_total, key="dst")
    device_tx = sort_by_device(data_op_events, num_devices_total, key="dst")

    unused: list[TraceEvent] = []
    for dev in range(num_devices_total):
        kernels = device_tgt[dev]
        n_kernels = len(kernels)
        tgt_idx = 0
        candidates: dict[int, TraceEvent] = {}
        for tx in device_tx[dev]:
            while tgt_idx < n_kernels and kernels[tgt_idx].end_ns < tx.start_ns:
                tgt_idx += 1
                candidates.clear()
            if tgt_idx == n_kernels:
                # Transfer occurs after the last kernel on this device.
                unused.append(tx)
            elif kernels[tgt_idx].start_ns > tx.start_ns:
                # In a gap between kernels; check for an unread predecessor.
                prior = candidates.get(tx.src_addr)
                if prior is not None:
                    unused.append(prior)
                candidates[tx.src_addr] = tx
            else:
                candidates.clear()
    unused.sort(key=lambda e: (e.start_ns, e.seq))
    return unused


def analyze(
    trace: Trace,
    warn: Optional[WarnFn] = None,
    strict_pseudocode: bool = False,
) -> Findings:
    """Run all five detectors over the appropriate event subsets.

    Hash-based passes see transfers with bytes > 0 and a content hash; the
    allocation passes see alloc/delete events; the unused-mapping passes see
    only target devices (the host runs no kernels, so host-received
    transfers -- results copied back -- are not "unused"). Raises
    InvalidTrace when the trace fails validation.
    """
    violations = validate(trace)
    if violations:
        raise InvalidTrace(violations)

    host = trace.host_device
    ndev = trace.num_devices_total
    transfer, alloc, delete, kernel = (
        EventKind.TRANSFER, EventKind.ALLOC, EventKind.DELETE, EventKind.KERNEL)

    hashed_transfers: list[TraceEvent] = []
    target_transfers: list[TraceEvent] = []
    data_ops: list[TraceEvent] = []  # transfers + allocs + deletes, trace order
    target_kernels: list[TraceEvent] = []
    for e in trace.events:
        k = e.kind
        if k is transfer:
            data_ops.append(e)
            if e.bytes > 0 and e.hash != 0:
                hashed_transfers.append(e)
            if e.dst_device != host:
                target_transfers.append(e)
        elif k is alloc or k is delete:
            data_ops.append(e)
        elif k is kernel:
            if e.dst_device != host:
                target_kernels.append(e)

    # Pair once over the full data-op stream so a never-freed allocation's
    # synthetic delete lands at the end of all data activity, not merely at
    # the last alloc/delete; both allocation passes share these pairs.
    pairs = get_alloc_delete_pairs(data_ops, warn=warn)
    target_pairs = [p for p in pairs if p.alloc_event.dst_device != host]

    return Findings(
        duplicates=find_duplicate_transfers(hashed_transfers),
        round_trips=find_round_trips(hashed_transfers, strict_pseudocode=strict_pseudocode),
        repeated_allocs=_group_alloc_pairs(pairs),
        unused_allocs=_unused_allocs_from_pairs(target_kernels, target_pairs, ndev),
        unused_transfers=find_unused_transfers(target_kernels, target_transfers, ndev),
    )
