"""Deterministic synthetic traces with exact, machine-checkable ground truth.

Each pattern injects one inefficiency family (or a mix) into an otherwise
well-formed offload workload:

- ``clean``        proper mapping spanning all kernels; nothing to find
- ``listing1``     one array re-transferred and re-allocated for each of two
                   back-to-back target regions (duplicate transfer +
                   repeated allocation)
- ``listing2``     a kernel in a loop with per-iteration implicit mapping:
                   the unmodified result bounces host<->device each
                   iteration (round trips + repeated allocations)
- ``unused_alloc``   alloc/delete pairs living entirely outside any kernel
- ``unused_transfer`` transfers overwritten in place before a kernel runs
- ``mixed``        all four blocks back to back

Events are laid out strictly serially (never overlapping; an optional
seeded jitter knob widens gaps but preserves that), so removing an event
shortens wall time by exactly its duration. That makes the optimized
counterpart exact: drop the redundant events, shift everything after them
left by the dropped durations, subtract the same total from wall time.

Payloads are real synthesized byte strings run through the production
hash function; distinctness is guaranteed by a unique counter prefix baked
into every generated payload (equal-content legs reuse the identical
bytes). Ground truth is exact by construction, modulo the global
collision-free-hash assumption.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .hashing import HashFn, hash_bytes
from .model import CodeLocation, EventKind, Trace, TraceEvent

PATTERNS = ("clean", "listing1", "listing2", "unused_alloc", "unused_transfer", "mixed")


class InvalidSpec(ValueError):
    pass


@dataclass(slots=True)
class PatternSpec:
    pattern: str
    n_iterations: int = 3
    bytes_per_array: int = 256
    n_devices: int = 2  # device slots including the host (slot 0)
    seed: int = 0
    transfer_ns_per_byte: int = 2
    alloc_ns: int = 400
    kernel_ns: int = 10_000
    jitter_ns: int = 0  # extra seeded gap between events, never overlap
    mutate_payloads: bool = False  # near-miss knob: corrupt would-be-identical legs

    def check(self) -> None:
        if self.pattern not in PATTERNS:
            raise InvalidSpec(f"unknown pattern {self.pattern!r} (choose from {PATTERNS})")
        if self.n_iterations < 1:
            raise InvalidSpec("n_iterations must be >= 1")
        if self.bytes_per_array < 9:
            raise InvalidSpec("bytes_per_array must be >= 9 (8-byte uniqueness prefix + body)")
        if self.n_devices < 2:
            raise InvalidSpec("n_devices must be >= 2 (host plus at least one target)")
        if min(self.transfer_ns_per_byte, self.alloc_ns, self.kernel_ns) <= 0:
            raise InvalidSpec("timing parameters must be positive")
        if self.jitter_ns < 0:
            raise InvalidSpec("jitter_ns must be >= 0")


@dataclass(slots=True)
class GroundTruth:
    dd_groups: int = 0
    dd_events: int = 0
    rt_pairs: int = 0
    ra_groups: int = 0
    ra_pairs: int = 0
    ua_pairs: int = 0
    ut_events: int = 0
    expected_union_savings_ns: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "dd_groups": self.dd_groups,
            "dd_events": self.dd_events,
            "rt_pairs": self.rt_pairs,
            "ra_groups": self.ra_groups,
            "ra_pairs": self.ra_pairs,
            "ua_pairs": self.ua_pairs,
            "ut_events": self.ut_events,
            "expected_union_savings_ns": self.expected_union_savings_ns,
        }


HOST = 0
_HOST_ADDR_BASE = 0x100000
_DEV_ADDR_BASE = 0xD0000000
_CODE_BASE = 0x400000


class _Builder:
    """Appends strictly serial events, tracking payloads and the seqs the
    pattern marks as redundant (the exact optimized-away set)."""

    def __init__(self, spec: PatternSpec, hash_fn: HashFn):
        spec.check()
        self.spec = spec
        self.hash_fn = hash_fn
        self.events: list[TraceEvent] = []
        self.payloads: dict[int, bytes] = {}
        self.removable: list[int] = []
        self.truth = GroundTruth()
        self.t = 0
        self.seq = 0
        self._jitter = random.Random(spec.seed ^ 0x6A17)
        self._payload_rng = random.Random(spec.seed ^ 0x9E3779B97F4A7C15)
        self._payload_counter = 0
        self._host_addr_next = _HOST_ADDR_BASE
        self._dev_addr_next: dict[int, int] = {}
        self._locs: dict[tuple[str, int], CodeLocation] = {}

    # -- identities ---------------------------------------------------------

    def host_addr(self) -> int:
        addr = self._host_addr_next
        self._host_addr_next += 0x1000
        return addr

    def dev_addr(self, device: int) -> int:
        base = self._dev_addr_next.setdefault(device, _DEV_ADDR_BASE + device * 0x1000000)
        self._dev_addr_next[device] = base + 0x1000
        return base

    def loc(self, file: str, line: int) -> CodeLocation:
        key = (file, line)
        cached = self._locs.get(key)
        if cached is None:
            cached = self._locs[key] = CodeLocation(
                codeptr=_CODE_BASE + len(self._locs) * 0x40, file=file, line=line)
        return cached

    def payload(self) -> bytes:
        """Fresh payload, bytewise distinct from every other by counter prefix."""
        n = self.spec.bytes_per_array
        self._payload_counter += 1
        return self._payload_counter.to_bytes(8, "little") + self._payload_rng.randbytes(n - 8)

    @staticmethod
    def mutate(payload: bytes) -> bytes:
        """Corrupt one body byte: same length and prefix, different content."""
        return payload[:-1] + bytes([(payload[-1] + 1) & 0xFF])

    # -- event emission -----------------------------------------------------

    def gap(self, ns: int = 0) -> None:
        self.t += ns
        if self.spec.jitter_ns:
            self.t += self._jitter.randint(0, self.spec.jitter_ns)

    def _emit(self, **kw) -> TraceEvent:
        event = TraceEvent(seq=self.seq, start_ns=self.t, **kw)
        self.seq += 1
        self.t = event.end_ns
        self.events.append(event)
        return event

    def alloc(self, device: int, host_addr: int, dev_addr: int, nbytes: int,
              loc: CodeLocation) -> TraceEvent:
        return self._emit(kind=EventKind.ALLOC, end_ns=self.t + self.spec.alloc_ns,
                          src_device=HOST, dst_device=device, src_addr=host_addr,
                          dst_addr=dev_addr, bytes=nbytes, hash=0, loc=loc)

    def delete(self, device: int, dev_addr: int, loc: CodeLocation) -> TraceEvent:
        return self._emit(kind=EventKind.DELETE, end_ns=self.t + self.spec.alloc_ns,
                          src_device=HOST, dst_device=device, src_addr=0,
                          dst_addr=dev_addr, bytes=0, hash=0, loc=loc)

    def transfer(self, src: int, dst: int, src_addr: int, dst_addr: int,
                 payload: bytes, loc: CodeLocation) -> TraceEvent:
        dur = len(payload) * self.spec.transfer_ns_per_byte
        event = self._emit(kind=EventKind.TRANSFER, end_ns=self.t + dur,
                           src_device=src, dst_device=dst, src_addr=src_addr,
                           dst_addr=dst_addr, bytes=len(payload),
                           hash=self.hash_fn(payload), loc=loc)
        self.payloads[event.seq] = payload
        return event

    def kernel(self, device: int, loc: CodeLocation) -> TraceEvent:
        return self._emit(kind=EventKind.KERNEL, end_ns=self.t + self.spec.kernel_ns,
                          src_device=device, dst_device=device, src_addr=0,
                          dst_addr=0, bytes=0, hash=0, loc=loc)

    def mark_removable(self, *events: TraceEvent) -> None:
        for event in events:
            self.removable.append(event.seq)
            self.truth.expected_union_savings_ns += event.end_ns - event.start_ns

    def finish(self) -> Trace:
        return Trace(version=1, num_devices_total=self.spec.n_devices,
                     host_device=HOST, wall_time_ns=self.t, events=self.events)


def _target_device(spec: PatternSpec, index: int) -> int:
    return 1 + index % (spec.n_devices - 1)


def _block_clean(b: _Builder, device: int) -> None:
    src = b.loc("clean.c", 10)
    a_host = b.host_addr()
    a_dev = b.dev_addr(device)
    nbytes = b.spec.bytes_per_array
    b.alloc(device, a_host, a_dev, nbytes, b.loc("clean.c", 8))
    b.transfer(HOST, device, a_host, a_dev, b.payload(), src)
    for _ in range(b.spec.n_iterations):
        b.kernel(device, b.loc("clean.c", 12))
        b.gap()
    b.transfer(device, HOST, a_dev, a_host, b.payload(), b.loc("clean.c", 16))
    b.delete(device, a_dev, b.loc("clean.c", 18))


def _block_listing1(b: _Builder, device: int) -> None:
    """Two back-to-back target regions each mapping the same unchanged array."""
    nbytes = b.spec.bytes_per_array
    a_host = b.host_addr()
    content = b.payload()
    second_payload = b.mutate(content) if b.spec.mutate_payloads else content

    region_lines = (20, 27)
    redundant: list[TraceEvent] = []
    for region, payload in zip(region_lines, (content, second_payload)):
        a_dev = b.dev_addr(device)
        alloc = b.alloc(device, a_host, a_dev, nbytes, b.loc("listing1.c", region))
        tx = b.transfer(HOST, device, a_host, a_dev, payload, b.loc("listing1.c", region))
        b.kernel(device, b.loc("listing1.c", region + 2))
        dele = b.delete(device, a_dev, b.loc("listing1.c", region + 5))
        if region != region_lines[0]:
            redundant.extend([alloc, dele])
            if not b.spec.mutate_payloads:
                redundant.append(tx)
    b.mark_removable(*redundant)

    if not b.spec.mutate_payloads:
        b.truth.dd_groups += 1
        b.truth.dd_events += 2
    b.truth.ra_groups += 1
    b.truth.ra_pairs += 2


def _block_listing2(b: _Builder, device: int) -> None:
    """A kernel in a loop with implicit per-iteration mapping: the result
    array rides back to the host and returns unmodified next iteration."""
    n = b.spec.n_iterations
    nbytes = b.spec.bytes_per_array
    a_host = b.host_addr()
    h2d_loc = b.loc("listing2.c", 31)
    d2h_loc = b.loc("listing2.c", 34)
    content = b.payload()  # array state entering the loop

    redundant: list[TraceEvent] = []
    for i in range(n):
        a_dev = b.dev_addr(device)
        alloc = b.alloc(device, a_host, a_dev, nbytes, h2d_loc)
        inbound = content
        if i > 0 and b.spec.mutate_payloads:
            inbound = b.mutate(content)
        tx = b.transfer(HOST, device, a_host, a_dev, inbound, h2d_loc)
        b.kernel(device, b.loc("listing2.c", 32))
        content = b.payload()  # kernel updated the array
        b.transfer(device, HOST, a_dev, a_host, content, d2h_loc)
        dele = b.delete(device, a_dev, d2h_loc)
        if i > 0:
            redundant.extend([alloc, dele])
            if not b.spec.mutate_payloads:
                redundant.append(tx)
    b.mark_removable(*redundant)

    if not b.spec.mutate_payloads:
        b.truth.rt_pairs += n - 1
    if n >= 2:
        b.truth.ra_groups += 1
        b.truth.ra_pairs += n


def _block_unused_alloc(b: _Builder, rotation: int) -> None:
    """A used mapping and kernel per device, then allocations whose whole
    lifetime falls after that device's last kernel."""
    spec = b.spec
    devices = sorted({_target_device(spec, rotation + i) for i in range(spec.n_iterations)})
    for device in devices:
        x_host = b.host_addr()
        x_dev = b.dev_addr(device)
        b.alloc(device, x_host, x_dev, spec.bytes_per_array, b.loc("unused_alloc.c", 40))
        b.transfer(HOST, device, x_host, x_dev, b.payload(), b.loc("unused_alloc.c", 41))
        b.kernel(device, b.loc("unused_alloc.c", 42))
        b.delete(device, x_dev, b.loc("unused_alloc.c", 43))

    for i in range(spec.n_iterations):
        device = _target_device(spec, rotation + i)
        b.gap(50)
        u_dev = b.dev_addr(device)
        alloc = b.alloc(device, b.host_addr(), u_dev, spec.bytes_per_array,
                        b.loc("unused_alloc.c", 47))
        dele = b.delete(device, u_dev, b.loc("unused_alloc.c", 48))
        b.mark_removable(alloc, dele)
    b.truth.ua_pairs += spec.n_iterations


def _block_unused_transfer(b: _Builder, device: int) -> None:
    """Per iteration, a transfer immediately overwritten from the same host
    address before the kernel runs: the first copy is dead on arrival."""
    spec = b.spec
    x_host = b.host_addr()
    x_dev = b.dev_addr(device)
    b.alloc(device, x_host, x_dev, spec.bytes_per_array, b.loc("unused_transfer.c", 60))
    for _ in range(spec.n_iterations):
        b.gap(50)  # clear of the previous kernel
        dead = b.transfer(HOST, device, x_host, x_dev, b.payload(),
                          b.loc("unused_transfer.c", 62))
        b.transfer(HOST, device, x_host, x_dev, b.payload(), b.loc("unused_transfer.c", 63))
        b.kernel(device, b.loc("unused_transfer.c", 64))
        b.mark_removable(dead)
    b.delete(device, x_dev, b.loc("unused_transfer.c", 66))
    b.truth.ut_events += spec.n_iterations


def _build(spec: PatternSpec, hash_fn: HashFn = hash_bytes) -> _Builder:
    b = _Builder(spec, hash_fn)
    if spec.pattern == "clean":
        _block_clean(b, _target_device(spec, 0))
    elif spec.pattern == "listing1":
        _block_listing1(b, _target_device(spec, 0))
    elif spec.pattern == "listing2":
        _block_listing2(b, _target_device(spec, 0))
    elif spec.pattern == "unused_alloc":
        _block_unused_alloc(b, 0)
    elif spec.pattern == "unused_transfer":
        _block_unused_transfer(b, _target_device(spec, 0))
    else:  # mixed
        _block_listing1(b, _target_device(spec, 0))
        b.gap(100)
        _block_listing2(b, _target_device(spec, 1))
        b.gap(100)
        _block_unused_alloc(b, 2)
        b.gap(100)
        _block_unused_transfer(b, _target_device(spec, 3))
    return b


def generate(spec: PatternSpec) -> tuple[Trace, GroundTruth]:
    """Build the pattern's trace and its exact expected analysis counts.
    Deterministic in the spec, seed included."""
    b = _build(spec)
    return b.finish(), b.truth


def generate_with_payloads(spec: PatternSpec) -> tuple[Trace, GroundTruth, dict[int, bytes]]:
    """Like generate, also returning each transfer's payload by seq (the
    material the shim's audit mode would dump as sidecar files)."""
    b = _build(spec)
    return b.finish(), b.truth, b.payloads


def removable_seqs(spec: PatternSpec) -> frozenset[int]:
    """The exact event set whose removal the pattern's optimization models."""
    return frozenset(_build(spec).removable)


def optimized_counterpart(spec: PatternSpec) -> Trace:
    """The same workload with the injected inefficiency removed: redundant
    events dropped, later events shifted left by the dropped durations, wall
    time shortened by exactly that total."""
    if spec.pattern == "clean":
        raise InvalidSpec("clean has no inefficiency to optimize away")
    b = _build(spec)
    removed = set(b.removable)
    shift = 0
    events: list[TraceEvent] = []
    for e in b.events:
        if e.seq in removed:
            shift += e.end_ns - e.start_ns
            continue
        events.append(replace(e, start_ns=e.start_ns - shift, end_ns=e.end_ns - shift))
    return Trace(version=1, num_devices_total=spec.n_devices, host_device=HOST,
                 wall_time_ns=b.t - shift, events=events)


def generate_scale(n_events: int, seed: int = 0, n_devices: int = 3) -> Trace:
    """Large well-formed trace for performance checks: rotating
    alloc/transfer/kernel/transfer/delete cycles over all target devices,
    payload hashes drawn from a fixed palette so generation stays cheap."""
    rng = random.Random(seed)
    palette = [hash_bytes(i.to_bytes(8, "little") + rng.randbytes(24)) for i in range(1, 513)]
    loc = CodeLocation(codeptr=0x400000, file="scale.c", line=1)
    events: list[TraceEvent] = []
    t = 0
    targets = list(range(1, n_devices))
    # share the boxed address ints across events; a million unique ones is
    # pure cache pressure for no information
    dev_addrs = {d: _DEV_ADDR_BASE + d * 0x1000000 for d in targets}
    host_addrs = [_HOST_ADDR_BASE + i * 0x1000 for i in range(4096)]
    cycle_dev = 0
    state = 0
    host_addr = host_addrs[0]
    for seq in range(n_events):
        device = targets[cycle_dev]
        dev_addr = dev_addrs[device]
        if state == 0:
            e = TraceEvent(seq, EventKind.ALLOC, t, t + 300, HOST, device,
                           host_addr, dev_addr, 64, 0, loc)
        elif state == 1:
            e = TraceEvent(seq, EventKind.TRANSFER, t, t + 128, HOST, device,
                           host_addr, dev_addr, 64, palette[seq % len(palette)], loc)
        elif state == 2:
            e = TraceEvent(seq, EventKind.KERNEL, t, t + 900, device, device, 0, 0, 0, 0, loc)
        elif state == 3:
            e = TraceEvent(seq, EventKind.TRANSFER, t, t + 128, device, HOST,
                           dev_addr, host_addr, 64, palette[(seq * 7 + 3) % len(palette)], loc)
        else:
            e = TraceEvent(seq, EventKind.DELETE, t, t + 300, HOST, device,
                           0, dev_addr, 0, 0, loc)
        events.append(e)
        t = e.end_ns
        state += 1
        if state == 5:
            state = 0
            cycle_dev = (cycle_dev + 1) % len(targets)
            host_addr = host_addrs[seq // 5 % 4096]
    return Trace(version=1, num_devices_total=n_devices, host_device=HOST,
                 wall_time_ns=t, events=events)
