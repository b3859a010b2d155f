"""Command-line entry point.

Subcommands: ``analyze`` a trace file, ``gen``(erate) a synthetic trace with
its ground-truth sidecar, ``audit`` recorded hashes against payload
sidecars, and ``version``.

Exit codes are a stable contract: 0 success (findings are results, not
failures), 1 unusable input, 2 internal or usage errors, 3 detector/oracle
divergence under ``--oracle``. Diagnostics and warnings go to stderr;
reports go to stdout. ``DMLENS_COLOR=auto|always|never`` styles the text
report (auto = only when stdout is a terminal).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .detectors import Findings, InvalidTrace, RoundTripGroup, analyze
from .model import EventKind
from .estimator import estimate
from .hashing import CollisionAuditStore
from .oracle import diff_findings, oracle_findings
from .report import attribute, render_json, render_text
from .synth import (
    PATTERNS, GroundTruth, InvalidSpec, PatternSpec,
    generate_with_payloads, optimized_counterpart,
)
from .traceio import TraceIOError, load_trace_file, write_trace_file

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2
EXIT_DIVERGENCE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmlens",
        description="Detect inefficient host/accelerator data-mapping patterns in event traces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_verbosity(p: argparse.ArgumentParser) -> None:
        group = p.add_mutually_exclusive_group()
        group.add_argument("-q", "--quiet", action="store_true", help="suppress warnings")
        group.add_argument("-v", "--verbose", action="store_true", help="enable verbose output")

    p_analyze = sub.add_parser("analyze", help="analyze a trace file and report findings")
    p_analyze.add_argument("trace", type=Path, help="trace file (NDJSON)")
    p_analyze.add_argument("--json", action="store_true", help="emit the JSON report")
    p_analyze.add_argument("--oracle", action="store_true",
                           help="also run the brute-force oracles and fail on divergence")
    p_analyze.add_argument("--strict-pseudocode", action="store_true",
                           help="unguarded round-trip matching (fidelity experiments)")
    p_analyze.add_argument("--min-bytes", type=int, default=1, metavar="N",
                           help="hide duplicate/round-trip findings smaller than N bytes "
                                "from the report (default 1: keep all)")
    add_verbosity(p_analyze)

    p_gen = sub.add_parser("gen", help="generate a synthetic trace plus ground-truth sidecar")
    p_gen.add_argument("out", type=Path, help="output trace path")
    p_gen.add_argument("--pattern", choices=PATTERNS, default="mixed")
    p_gen.add_argument("--iterations", type=int, default=3)
    p_gen.add_argument("--bytes-per-array", type=int, default=256)
    p_gen.add_argument("--devices", type=int, default=2,
                       help="device slots including the host")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--transfer-ns-per-byte", type=int, default=2)
    p_gen.add_argument("--alloc-ns", type=int, default=400)
    p_gen.add_argument("--kernel-ns", type=int, default=10_000)
    p_gen.add_argument("--jitter-ns", type=int, default=0)
    p_gen.add_argument("--mutate-payloads", action="store_true",
                       help="near-miss variant: corrupt would-be-identical payloads")
    p_gen.add_argument("--optimized", action="store_true",
                       help="write the optimized counterpart instead")
    p_gen.add_argument("--payload-dir", type=Path, default=None,
                       help="also dump each transfer payload as <seq>.bin for auditing")
    add_verbosity(p_gen)

    p_audit = sub.add_parser("audit", help="replay payload sidecars through the collision audit")
    p_audit.add_argument("trace", type=Path)
    p_audit.add_argument("--payload-dir", type=Path, required=True,
                         help="directory of <seq>.bin payload files")
    add_verbosity(p_audit)

    sub.add_parser("version", help="print the version")
    return parser


def _want_color() -> bool:
    mode = os.environ.get("DMLENS_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return sys.stdout.isatty()


def _print_warnings(args, warnings: Sequence[object]) -> None:
    if args.quiet:
        return
    for w in warnings:
        print(f"dmlens: warning: {w}", file=sys.stderr)


def _filter_min_bytes(findings: Findings, min_bytes: int) -> Findings:
    """Reporting filter only; detection state is never thresholded."""
    if min_bytes <= 1:
        return findings
    duplicates = [g for g in findings.duplicates if g.events[0].bytes >= min_bytes]
    round_trips = []
    for g in findings.round_trips:
        trips = [(tx, rx) for tx, rx in g.trips if tx.bytes >= min_bytes]
        if trips:
            round_trips.append(RoundTripGroup(g.hash, g.src_device, g.dest_device, trips))
    return Findings(duplicates, round_trips, findings.repeated_allocs,
                    findings.unused_allocs, findings.unused_transfers)


def _cmd_analyze(args) -> int:
    try:
        trace = load_trace_file(args.trace)
    except OSError as exc:
        print(f"dmlens: error: cannot read {args.trace}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TraceIOError as exc:
        print(f"dmlens: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    prep_warnings: list[object] = []
    try:
        findings = analyze(trace, warn=prep_warnings.append,
                           strict_pseudocode=args.strict_pseudocode)
    except InvalidTrace as exc:
        print(f"dmlens: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _print_warnings(args, prep_warnings)

    if args.oracle:
        diffs = diff_findings(findings, oracle_findings(trace))
        if diffs:
            for d in diffs:
                print(f"dmlens: divergence: {d}", file=sys.stderr)
            return EXIT_DIVERGENCE
        if args.verbose:
            print("dmlens: oracle agreement on all five detectors", file=sys.stderr)

    reported = _filter_min_bytes(findings, args.min_bytes)
    savings = estimate(trace, reported)
    _print_warnings(args, savings.warnings)
    issues = attribute(trace, reported)
    if args.json:
        sys.stdout.write(render_json(trace, reported, savings, issues))
    else:
        sys.stdout.write(render_text(trace, reported, savings, issues, color=_want_color()))
    if args.verbose:
        print(f"dmlens: {len(trace.events)} events, {reported.total_count()} findings",
              file=sys.stderr)
    return EXIT_OK


def _cmd_gen(args) -> int:
    spec = PatternSpec(
        pattern=args.pattern,
        n_iterations=args.iterations,
        bytes_per_array=args.bytes_per_array,
        n_devices=args.devices,
        seed=args.seed,
        transfer_ns_per_byte=args.transfer_ns_per_byte,
        alloc_ns=args.alloc_ns,
        kernel_ns=args.kernel_ns,
        jitter_ns=args.jitter_ns,
        mutate_payloads=args.mutate_payloads,
    )
    try:
        if args.optimized:
            trace = optimized_counterpart(spec)
            truth: Optional[GroundTruth] = None
            payloads: dict[int, bytes] = {}
        else:
            trace, truth, payloads = generate_with_payloads(spec)
    except InvalidSpec as exc:
        print(f"dmlens: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    write_trace_file(args.out, trace)
    if truth is not None:
        import json
        truth_path = Path(f"{args.out}.truth.json")
        truth_path.write_text(json.dumps(truth.as_dict(), indent=2) + "\n", encoding="utf-8")
        if args.verbose:
            print(f"dmlens: wrote {args.out} and {truth_path}", file=sys.stderr)
    if args.payload_dir is not None:
        args.payload_dir.mkdir(parents=True, exist_ok=True)
        for seq, payload in payloads.items():
            (args.payload_dir / f"{seq}.bin").write_bytes(payload)
    return EXIT_OK


def _cmd_audit(args) -> int:
    try:
        trace = load_trace_file(args.trace)
    except OSError as exc:
        print(f"dmlens: error: cannot read {args.trace}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TraceIOError as exc:
        print(f"dmlens: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    store = CollisionAuditStore()
    missing = 0
    observed = 0
    for event in trace.events:
        if event.kind is not EventKind.TRANSFER or event.hash == 0 or event.bytes == 0:
            continue
        sidecar = args.payload_dir / f"{event.seq}.bin"
        try:
            payload = sidecar.read_bytes()
        except OSError:
            missing += 1
            if not args.quiet:
                print(f"dmlens: warning: no payload sidecar for seq {event.seq}", file=sys.stderr)
            continue
        store.observe(event.hash, payload)
        observed += 1
    if args.verbose:
        print(f"dmlens: audited {observed} transfers ({missing} missing sidecars)",
              file=sys.stderr)
    print(f"collision_count: {store.collision_count}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "audit":
            return _cmd_audit(args)
        if args.command == "version":
            print(f"dmlens {__version__}")
            return EXIT_OK
        parser.error(f"unknown command {args.command!r}")
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # internal failure, not an input problem
        print(f"dmlens: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
