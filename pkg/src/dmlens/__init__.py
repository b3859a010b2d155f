"""dmlens: trace-driven detection of inefficient data-mapping patterns in
heterogeneous (host + accelerator) program executions."""

__version__ = "0.1.0"

from .detectors import (
    DuplicateGroup,
    Findings,
    RepeatedAllocGroup,
    RoundTripGroup,
    analyze,
    find_duplicate_transfers,
    find_repeated_allocs,
    find_round_trips,
    find_unused_allocs,
    find_unused_transfers,
)
from .estimator import SavingsEstimate, estimate
from .hashing import CollisionAuditStore, hash_bytes
from .model import CodeLocation, EventKind, Trace, TraceEvent, Violation, validate
from .prep import AllocPair, get_alloc_delete_pairs, sort_by_device
from .report import AttributedIssue, attribute, render_json, render_text
from .synth import GroundTruth, PatternSpec, generate, optimized_counterpart
from .traceio import parse_trace, serialize_trace

__all__ = [
    "AllocPair",
    "AttributedIssue",
    "CodeLocation",
    "CollisionAuditStore",
    "DuplicateGroup",
    "EventKind",
    "Findings",
    "GroundTruth",
    "PatternSpec",
    "RepeatedAllocGroup",
    "RoundTripGroup",
    "SavingsEstimate",
    "Trace",
    "TraceEvent",
    "Violation",
    "analyze",
    "attribute",
    "estimate",
    "find_duplicate_transfers",
    "find_repeated_allocs",
    "find_round_trips",
    "find_unused_allocs",
    "find_unused_transfers",
    "generate",
    "get_alloc_delete_pairs",
    "hash_bytes",
    "optimized_counterpart",
    "parse_trace",
    "render_json",
    "render_text",
    "serialize_trace",
    "sort_by_device",
    "validate",
]
