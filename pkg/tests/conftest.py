"""Shared test helpers: hand-rolled event constructors and a seeded random
trace generator that only emits model-valid traces but otherwise goes out of
its way to be nasty (overlapping intervals, equal start times, self
transfers, unmatched deletes, host-directed traffic, tiny hash pools so
duplicates and round trips actually occur)."""

from __future__ import annotations

import random

from dmlens.model import CodeLocation, EventKind, Trace, TraceEvent


def make_event(seq, kind, t0, t1, src=0, dst=1, src_addr=0, dst_addr=0,
               nbytes=0, hash=0, codeptr=0, file=None, line=None) -> TraceEvent:
    return TraceEvent(
        seq=seq, kind=kind, start_ns=t0, end_ns=t1, src_device=src, dst_device=dst,
        src_addr=src_addr, dst_addr=dst_addr, bytes=nbytes, hash=hash,
        loc=CodeLocation(codeptr=codeptr, file=file, line=line),
    )


def transfer(seq, t0, t1, src, dst, hash, nbytes=64, src_addr=0x100, dst_addr=0x200, **kw):
    return make_event(seq, EventKind.TRANSFER, t0, t1, src=src, dst=dst,
                      src_addr=src_addr, dst_addr=dst_addr, nbytes=nbytes, hash=hash, **kw)


def alloc(seq, t0, t1, dev, dst_addr, src_addr=0x100, nbytes=64, **kw):
    return make_event(seq, EventKind.ALLOC, t0, t1, src=0, dst=dev,
                      src_addr=src_addr, dst_addr=dst_addr, nbytes=nbytes, **kw)


def delete(seq, t0, t1, dev, dst_addr, **kw):
    return make_event(seq, EventKind.DELETE, t0, t1, src=0, dst=dev,
                      dst_addr=dst_addr, **kw)


def kernel(seq, t0, t1, dev, **kw):
    return make_event(seq, EventKind.KERNEL, t0, t1, src=dev, dst=dev, **kw)


def random_trace(seed: int, max_events: int = 200, max_devices: int = 4) -> Trace:
    rng = random.Random(seed)
    n_devices = rng.randint(2, max_devices)
    host = rng.randrange(n_devices)
    n_events = rng.randint(0, max_events)

    hash_pool = [rng.randint(1, 2**64 - 1) for _ in range(rng.randint(1, 6))]
    addr_pool = [0x1000 * i for i in range(1, rng.randint(2, 7))]
    dev_addr_pool = [0xD000 + 0x100 * i for i in range(1, rng.randint(2, 7))]
    codeptr_pool = [0, 0x400100, 0x400200]

    raw = []
    t = 0
    for _ in range(n_events):
        t += rng.randint(0, 40)  # frequent equal starts
        dur = rng.randint(0, 60)  # overlaps with later events are common
        roll = rng.random()
        loc_ptr = rng.choice(codeptr_pool)
        file, line = (None, None)
        if loc_ptr and rng.random() < 0.5:
            file, line = f"src{loc_ptr % 7}.c", 1 + loc_ptr % 13
        if roll < 0.45:
            src = rng.randrange(n_devices)
            dst = rng.randrange(n_devices)  # self transfers allowed
            nbytes = rng.choice([0, 8, 64, 4096])
            h = rng.choice(hash_pool) if nbytes else rng.choice([0, rng.choice(hash_pool)])
            raw.append(("transfer", t, t + dur, src, dst,
                        rng.choice(addr_pool), rng.choice(dev_addr_pool), nbytes, h,
                        loc_ptr, file, line))
        elif roll < 0.62:
            dst = rng.randrange(n_devices)  # allocations may target the host slot
            raw.append(("alloc", t, t + dur, host, dst, rng.choice(addr_pool),
                        rng.choice(dev_addr_pool), rng.choice([8, 64, 256]), 0,
                        loc_ptr, file, line))
        elif roll < 0.80:
            dst = rng.randrange(n_devices)  # deletes may be unmatched
            raw.append(("delete", t, t + dur, host, dst, 0,
                        rng.choice(dev_addr_pool), 0, 0, loc_ptr, file, line))
        else:
            dev = rng.randrange(n_devices)  # occasional host "kernel" exercises scoping
            raw.append(("kernel", t, t + dur, dev, dev, 0, 0, 0, 0, loc_ptr, file, line))

    raw.sort(key=lambda r: r[1])
    events = [
        TraceEvent(
            seq=i, kind=EventKind(kind), start_ns=t0, end_ns=t1,
            src_device=src, dst_device=dst, src_addr=src_addr, dst_addr=dst_addr,
            bytes=nbytes, hash=h, loc=CodeLocation(codeptr=ptr, file=file, line=line),
        )
        for i, (kind, t0, t1, src, dst, src_addr, dst_addr, nbytes, h, ptr, file, line)
        in enumerate(raw)
    ]
    wall = None if rng.random() < 0.3 else (max((e.end_ns for e in events), default=0))
    return Trace(version=1, num_devices_total=n_devices, host_device=host,
                 wall_time_ns=wall, events=events)
