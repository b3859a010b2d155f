"""Event preparation: alloc/delete pairing and per-device partitioning.

Deletion events carry only a device address, so each Delete is matched to
the most recent still-live Alloc at the same (device, address) -- LIFO,
which mirrors how nested structured data regions allocate and free and how
device allocators reuse addresses. Allocations that are never freed get a
synthetic Delete pinned to the end of the trace so the lifetime sweeps can
still see them; such pairs are flagged ``synthetic_delete``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .model import DeviceNum, EventKind, TraceEvent


@dataclass(slots=True)
class AllocPair:
    alloc_event: TraceEvent
    delete_event: TraceEvent
    synthetic_delete: bool = False


@dataclass(slots=True)
class PrepWarning:
    seq: int
    reason: str

    def __str__(self) -> str:
        return f"seq {self.seq}: {self.reason}"


class DeviceOutOfRange(Exception):
    def __init__(self, seq: int, device: int, num_devices_total: int):
        super().__init__(f"event seq {seq}: device {device} outside [0, {num_devices_total})")
        self.seq = seq
        self.device = device


WarnFn = Callable[[PrepWarning], None]


def get_alloc_delete_pairs(
    data_op_events: Sequence[TraceEvent],
    warn: Optional[WarnFn] = None,
) -> list[AllocPair]:
    """Pair each Delete with the most recent unmatched Alloc at the same
    (device, address); pair leftover Allocs with a synthetic trace-end Delete.

    Input must be chronologically ordered. Non-Alloc/Delete events are
    ignored. A Delete with no live Alloc at its address is dropped and
    reported through ``warn``. Pairs come back ordered by allocation start.
    """
    live: dict[tuple[DeviceNum, int], list[TraceEvent]] = {}
    pairs: list[AllocPair] = []
    max_end = 0
    alloc_kind, delete_kind = EventKind.ALLOC, EventKind.DELETE
    for e in data_op_events:
        if e.end_ns > max_end:
            max_end = e.end_ns
        kind = e.kind
        if kind is alloc_kind:
            key = (e.dst_device, e.dst_addr)
            stack = live.get(key)
            if stack is None:
                live[key] = [e]
            else:
                stack.append(e)
        elif kind is delete_kind:
            stack = live.get((e.dst_device, e.dst_addr))
            if stack:
                pairs.append(AllocPair(stack.pop(), e))
            elif warn is not None:
                warn(PrepWarning(e.seq, "delete without a live allocation at this device address"))

    for stack in live.values():
        for alloc in stack:
            synthetic = TraceEvent(
                seq=alloc.seq,  # no real event exists; flagged via synthetic_delete
                kind=EventKind.DELETE,
                start_ns=max_end,
                end_ns=max_end,
                src_device=alloc.src_device,
                dst_device=alloc.dst_device,
                src_addr=0,
                dst_addr=alloc.dst_addr,
                bytes=0,
                hash=0,
                loc=alloc.loc,
            )
            pairs.append(AllocPair(alloc, synthetic, synthetic_delete=True))

    pairs.sort(key=lambda p: (p.alloc_event.start_ns, p.alloc_event.seq))
    return pairs


def sort_by_device(
    events: Sequence[TraceEvent],
    num_devices_total: int,
    key: str = "dst",
) -> list[list[TraceEvent]]:
    """Partition events into per-device lists by src or dst device,
    preserving chronological order. Raises DeviceOutOfRange."""
    if key not in ("src", "dst"):
        raise ValueError(f"key must be 'src' or 'dst', got {key!r}")
    by_src = key == "src"
    out: list[list[TraceEvent]] = [[] for _ in range(num_devices_total)]
    for e in events:
        d = e.src_device if by_src else e.dst_device
        if not 0 <= d < num_devices_total:
            raise DeviceOutOfRange(e.seq, d, num_devices_total)
        out[d].append(e)
    return out
