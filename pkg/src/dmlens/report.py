"""Source attribution and report rendering (text and JSON).

Each finding's constituent events are aggregated per category by source
location -- resolved file:line when the producer had debug info, raw code
pointer otherwise -- so one offending map clause shows up as one row no
matter how many times it fired. Events with no location at all (codeptr 0)
aggregate into a single "<unknown>" row per category rather than being
dropped; silently losing data in a profiler is worse than an ugly row.

Rendering is deterministic: equal inputs produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .detectors import Findings
from .estimator import CATEGORIES, SavingsEstimate
from .model import CodeLocation, Trace, TraceEvent

CATEGORY_TITLES = {
    "DD": "Duplicate Target Data Transfer",
    "RT": "Round-Trip Target Data Transfer",
    "RA": "Repeated Device Memory Allocation",
    "UA": "Unused Device Memory Allocation",
    "UT": "Unused Data Transfer",
}

REPORT_VERSION = 1


@dataclass(slots=True)
class AttributedIssue:
    category: str
    location: CodeLocation
    occurrence_count: int
    total_ns: int
    total_bytes: int
    pct_of_wall: float


def _category_events(findings: Findings) -> dict[str, list[TraceEvent]]:
    """Constituent events per category. Synthetic trace-end deletes are not
    real events and are skipped."""
    out: dict[str, list[TraceEvent]] = {c: [] for c in CATEGORIES}
    for group in findings.duplicates:
        out["DD"].extend(group.events)
    for group in findings.round_trips:
        for tx, rx in group.trips:
            out["RT"].append(tx)
            out["RT"].append(rx)
    for group in findings.repeated_allocs:
        for pair in group.pairs:
            out["RA"].append(pair.alloc_event)
            if not pair.synthetic_delete:
                out["RA"].append(pair.delete_event)
    for pair in findings.unused_allocs:
        out["UA"].append(pair.alloc_event)
        if not pair.synthetic_delete:
            out["UA"].append(pair.delete_event)
    out["UT"].extend(findings.unused_transfers)
    return out


def _loc_key(loc: CodeLocation):
    if loc.file is not None:
        return (0, loc.file, loc.line or 0)
    return (1, "", loc.codeptr)


def attribute(trace: Trace, findings: Findings) -> list[AttributedIssue]:
    """Aggregate finding events into per-location issues, ordered within
    each category by total time descending."""
    wall = trace.wall_time()
    issues: list[AttributedIssue] = []
    for category, events in _category_events(findings).items():
        buckets: dict[tuple, list[TraceEvent]] = {}
        for event in events:
            buckets.setdefault(_loc_key(event.loc), []).append(event)
        rows = []
        for key, members in buckets.items():
            total_ns = sum(e.end_ns - e.start_ns for e in members)
            rows.append(AttributedIssue(
                category=category,
                location=members[0].loc,
                occurrence_count=len(members),
                total_ns=total_ns,
                total_bytes=sum(e.bytes for e in members),
                pct_of_wall=(total_ns / wall) if wall else 0.0,
            ))
        rows.sort(key=lambda r: (-r.total_ns, _loc_key(r.location)))
        issues.extend(rows)
    return issues


def format_location(loc: CodeLocation) -> str:
    if loc.file is not None:
        return f"{loc.file}:{loc.line}"
    if loc.codeptr:
        return f"0x{loc.codeptr:x}"
    return "<unknown>"


def _speedup_text(speedup: float) -> str:
    if speedup == float("inf"):
        return "inf"
    return f"{speedup:.4f}x"


_HEADER_ROW = f"{'time(%)':>8}  {'time(ns)':>14}  {'count':>8}  {'bytes':>14}  location"


def render_text(
    trace: Trace,
    findings: Findings,
    savings: SavingsEstimate,
    issues: Iterable[AttributedIssue],
    color: bool = False,
) -> str:
    """Render the five analysis sections plus a summary block."""
    bold = ("\033[1m", "\033[0m") if color else ("", "")
    by_category: dict[str, list[AttributedIssue]] = {c: [] for c in CATEGORIES}
    for issue in issues:
        by_category[issue.category].append(issue)

    lines: list[str] = []
    for category in CATEGORIES:
        lines.append(f"{bold[0]}=== {CATEGORY_TITLES[category]} Analysis ==={bold[1]}")
        rows = by_category[category]
        if not rows:
            lines.append("(none detected)")
        else:
            lines.append(_HEADER_ROW)
            for r in rows:
                pct = f"{r.pct_of_wall * 100:.2f}%"
                lines.append(
                    f"{pct:>8}  {r.total_ns:>14}  {r.occurrence_count:>8}  "
                    f"{r.total_bytes:>14}  {format_location(r.location)}"
                )
        lines.append("")

    lines.append(f"{bold[0]}=== Summary ==={bold[1]}")
    lines.append(f"{'wall time (ns):':<28}{savings.wall_time_ns}")
    for category in CATEGORIES:
        count = len(by_category[category])
        ns = savings.per_category_ns[category]
        lines.append(f"{f'{category} eliminable (ns):':<28}{ns}  ({count} locations)")
    lines.append(f"{'union eliminable (ns):':<28}{savings.union_ns}")
    lines.append(f"{'predicted speedup:':<28}{_speedup_text(savings.predicted_speedup)}")
    for warning in savings.warnings:
        lines.append(f"warning: {warning}")
    lines.append("")
    return "\n".join(lines)


def render_json(
    trace: Trace,
    findings: Findings,
    savings: SavingsEstimate,
    issues: Iterable[AttributedIssue],
) -> str:
    """Machine-readable mirror of the text report; stable key order, plain
    JSON (an unbounded speedup is encoded as null)."""
    speedup: Optional[float] = savings.predicted_speedup
    if speedup == float("inf"):
        speedup = None

    def issue_obj(r: AttributedIssue) -> dict:
        return {
            "location": {
                "codeptr": r.location.codeptr,
                "file": r.location.file,
                "line": r.location.line,
                "display": format_location(r.location),
            },
            "occurrence_count": r.occurrence_count,
            "total_ns": r.total_ns,
            "total_bytes": r.total_bytes,
            "pct_of_wall": r.pct_of_wall,
        }

    by_category: dict[str, list[dict]] = {c: [] for c in CATEGORIES}
    for issue in issues:
        by_category[issue.category].append(issue_obj(issue))

    doc = {
        "report_version": REPORT_VERSION,
        "trace": {
            "num_devices": trace.num_devices_total,
            "host_device": trace.host_device,
            "events": len(trace.events),
            "wall_time_ns": savings.wall_time_ns,
        },
        "issues": by_category,
        "finding_counts": {
            "DD": len(findings.duplicates),
            "RT": len(findings.round_trips),
            "RA": len(findings.repeated_allocs),
            "UA": len(findings.unused_allocs),
            "UT": len(findings.unused_transfers),
        },
        "savings": {
            "per_category_ns": {c: savings.per_category_ns[c] for c in CATEGORIES},
            "union_ns": savings.union_ns,
            "wall_time_ns": savings.wall_time_ns,
            "predicted_speedup": speedup,
            "eliminable_event_count": len(savings.eliminable_seqs),
            "warnings": list(savings.warnings),
        },
    }
    return json.dumps(doc, indent=2) + "\n"
