from __future__ import annotations

import pytest
from conftest import alloc, delete, kernel, make_event, random_trace, transfer

from dmlens.model import CodeLocation, EventKind, Trace, TraceEvent, validate


def empty_trace(num_devices=2, host=0):
    return Trace(version=1, num_devices_total=num_devices, host_device=host,
                 wall_time_ns=None, events=[])


def test_empty_trace_is_valid():
    assert validate(empty_trace()) == []


def test_inverted_interval_is_a_violation():
    tr = empty_trace()
    tr.events = [transfer(0, 10, 5, 0, 1, hash=7)]
    violations = validate(tr)
    assert any(v.rule == "interval" and v.seq == 0 for v in violations)


def test_hashless_nonempty_transfer_rejected():
    tr = empty_trace()
    tr.events = [transfer(0, 0, 1, 0, 1, hash=0, nbytes=64)]
    assert any(v.rule == "transfer" for v in validate(tr))


def test_zero_byte_transfer_may_omit_hash():
    tr = empty_trace()
    tr.events = [transfer(0, 0, 1, 0, 1, hash=0, nbytes=0)]
    assert validate(tr) == []


def test_alloc_requires_bytes_and_address():
    tr = empty_trace()
    tr.events = [make_event(0, EventKind.ALLOC, 0, 1, dst=1, dst_addr=0, nbytes=0)]
    rules = {v.rule for v in validate(tr)}
    assert "alloc" in rules


def test_delete_requires_address():
    tr = empty_trace()
    tr.events = [make_event(0, EventKind.DELETE, 0, 1, dst=1, dst_addr=0)]
    assert any(v.rule == "delete" for v in validate(tr))


def test_kernel_devices_must_match():
    tr = empty_trace()
    tr.events = [make_event(0, EventKind.KERNEL, 0, 1, src=0, dst=1)]
    assert any(v.rule == "kernel" for v in validate(tr))


def test_device_out_of_range():
    tr = empty_trace(num_devices=2)
    tr.events = [transfer(0, 0, 1, 0, 5, hash=7, nbytes=8)]
    assert any(v.rule == "device" for v in validate(tr))


def test_host_device_out_of_range():
    tr = empty_trace(num_devices=2, host=2)
    assert any(v.rule == "header" for v in validate(tr))


def test_events_must_be_sorted():
    tr = empty_trace()
    tr.events = [kernel(0, 10, 11, 1), kernel(1, 5, 6, 1)]
    assert any(v.rule == "order" for v in validate(tr))


def test_seq_must_increase_with_time():
    tr = empty_trace()
    tr.events = [kernel(9, 0, 1, 1), kernel(3, 10, 11, 1)]
    assert any(v.rule == "order" for v in validate(tr))


def test_file_without_line_is_a_violation():
    tr = empty_trace()
    e = kernel(0, 0, 1, 1)
    e.loc = CodeLocation(codeptr=1, file="a.c", line=None)
    tr.events = [e]
    assert any(v.rule == "location" for v in validate(tr))


def test_negative_field_is_a_violation():
    tr = empty_trace()
    e = kernel(0, 0, 1, 1)
    e.bytes = -1
    tr.events = [e]
    assert any(v.rule == "field-range" for v in validate(tr))


@pytest.mark.parametrize("seed", range(40))
def test_random_traces_are_valid(seed):
    assert validate(random_trace(seed)) == []


def test_wall_time_prefers_header_then_span():
    tr = empty_trace()
    tr.events = [kernel(0, 5, 20, 1)]
    assert tr.wall_time() == 15
    tr.wall_time_ns = 100
    assert tr.wall_time() == 100
    assert empty_trace().wall_time() == 0


def test_target_devices_excludes_host():
    tr = Trace(version=1, num_devices_total=4, host_device=2, wall_time_ns=None, events=[])
    assert list(tr.target_devices()) == [0, 1, 3]


def test_event_duration():
    assert kernel(0, 5, 20, 1).duration_ns() == 15


def test_validate_does_not_mutate():
    tr = random_trace(7)
    before = [TraceEvent(**{f: getattr(e, f) for f in (
        "seq", "kind", "start_ns", "end_ns", "src_device", "dst_device",
        "src_addr", "dst_addr", "bytes", "hash", "loc")}) for e in tr.events]
    validate(tr)
    assert tr.events == before
