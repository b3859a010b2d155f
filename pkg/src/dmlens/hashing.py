"""Content hashing of transfer payloads, plus the collision-audit facility.

The analyzer itself only consumes hash values already present in trace
records; this module is what trace *producers* (the synthetic generator and
the capture shim) use, so the one hard requirement is stability: equal byte
sequences hash equal across processes, machines, and the TypeScript shim
port. No per-process seeding.

The default function folds the payload into 64-bit little-endian words with
an FNV-1a step per word and finishes with a murmur3-style avalanche. It is
deliberately pluggable: any 64-bit function of the payload works, the
detectors only need equal-content => equal-hash.

0 is reserved to mean "no hash"; a computed hash of 0 is remapped to 1.
"""

from __future__ import annotations

import struct
from typing import Callable

_MASK64 = 2**64 - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

HashFn = Callable[[bytes], int]


class EmptyPayload(ValueError):
    def __init__(self) -> None:
        super().__init__("cannot hash a zero-byte payload")


def _fold64(payload: bytes) -> int:
    n = len(payload)
    full = n // 8
    h = _FNV_OFFSET
    if full:
        for word in struct.unpack_from(f"<{full}Q", payload):
            h = ((h ^ word) * _FNV_PRIME) & _MASK64
    tail = n - full * 8
    if tail:
        word = int.from_bytes(payload[n - tail:], "little")
        h = ((h ^ word) * _FNV_PRIME) & _MASK64
    h ^= n
    # murmur3 fmix64 avalanche
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & _MASK64
    h ^= h >> 33
    return h


def make_hasher(raw: Callable[[bytes], int]) -> HashFn:
    """Wrap a raw 64-bit hash so it meets the producer contract: rejects
    empty payloads and never returns the reserved value 0."""

    def hash_fn(payload: bytes) -> int:
        if len(payload) == 0:
            raise EmptyPayload()
        return raw(payload) or 1

    return hash_fn


hash_bytes: HashFn = make_hasher(_fold64)


class CollisionAuditStore:
    """Keeps the first payload seen for each hash and counts byte-unequal
    repeats. Memory cost is the sum of unique payload sizes; this exists for
    auditing hash quality, not for routine runs. Single-writer."""

    def __init__(self) -> None:
        self._first_payload: dict[int, bytes] = {}
        self.collision_count = 0

    def __len__(self) -> int:
        return len(self._first_payload)

    def observe(self, hash_value: int, payload: bytes) -> None:
        stored = self._first_payload.get(hash_value)
        if stored is None:
            self._first_payload[hash_value] = bytes(payload)
        elif stored != payload:
            self.collision_count += 1


def audit_observe(store: CollisionAuditStore, hash_value: int, payload: bytes) -> CollisionAuditStore:
    store.observe(hash_value, payload)
    return store
