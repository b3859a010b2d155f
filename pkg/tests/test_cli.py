from __future__ import annotations

import json

import pytest

from dmlens import __version__
from dmlens.cli import main
from dmlens.synth import PatternSpec, generate_with_payloads
from dmlens.traceio import serialize_trace, write_trace_file

GOOD_HEADER = '{"dmlens":1,"num_devices":2,"host_device":0,"wall_time_ns":100}'


@pytest.fixture()
def listing1_trace(tmp_path):
    path = tmp_path / "listing1.trace"
    trace, truth, payloads = generate_with_payloads(PatternSpec(pattern="listing1", seed=4))
    write_trace_file(path, trace)
    return path, trace, truth, payloads


def test_version_subcommand(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == f"dmlens {__version__}"


def test_analyze_clean_trace_reports_none(tmp_path, capsys):
    path = tmp_path / "clean.trace"
    assert main(["gen", str(path), "--pattern", "clean"]) == 0
    assert main(["analyze", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.count("(none detected)") == 5


def test_analyze_listing1_text_report(listing1_trace, capsys):
    path, *_ = listing1_trace
    assert main(["analyze", str(path)]) == 0
    out = capsys.readouterr().out
    assert "=== Duplicate Target Data Transfer Analysis ===" in out
    assert "listing1.c:27" in out


def test_analyze_json_report(listing1_trace, capsys):
    path, *_ = listing1_trace
    assert main(["analyze", "--json", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["finding_counts"]["DD"] == 1


def test_analyze_missing_file_exits_1(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.trace")]) == 1
    assert "error" in capsys.readouterr().err


def test_analyze_malformed_file_exits_1_naming_line(tmp_path, capsys):
    path = tmp_path / "bad.trace"
    path.write_text(GOOD_HEADER + "\n"
                    '{"seq":0,"kind":"transfer","t0":10,"t1":5,"src_dev":0,"dst_dev":1,'
                    '"src_addr":0,"dst_addr":0,"bytes":0,"hash":0,"codeptr":0}\n')
    assert main(["analyze", str(path)]) == 1
    err = capsys.readouterr().err
    assert "MalformedRecord" in err and "line 2" in err


def test_analyze_oracle_mode_agrees(listing1_trace, capsys):
    path, *_ = listing1_trace
    assert main(["analyze", "--oracle", str(path)]) == 0


def test_analyze_strict_pseudocode_flag(listing1_trace, capsys):
    path, *_ = listing1_trace
    assert main(["analyze", "--strict-pseudocode", str(path)]) == 0


def test_min_bytes_mutes_small_transfers(tmp_path, capsys):
    path = tmp_path / "t.trace"
    assert main(["gen", str(path), "--pattern", "listing1", "--bytes-per-array", "64"]) == 0
    assert main(["analyze", "--json", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["finding_counts"]["DD"] == 1
    assert main(["analyze", "--json", "--min-bytes", "65", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["finding_counts"]["DD"] == 0       # muted from the report
    assert doc["finding_counts"]["RA"] == 1       # allocation findings untouched


def test_quiet_suppresses_warnings_not_findings(tmp_path, capsys):
    # trace with an unmatched delete (prep warning) and a duplicate
    lines = [
        GOOD_HEADER,
        '{"seq":0,"kind":"delete","t0":0,"t1":1,"src_dev":0,"dst_dev":1,'
        '"src_addr":0,"dst_addr":53248,"bytes":0,"hash":0,"codeptr":0}',
        '{"seq":1,"kind":"transfer","t0":2,"t1":3,"src_dev":0,"dst_dev":1,'
        '"src_addr":4096,"dst_addr":8192,"bytes":8,"hash":9,"codeptr":0}',
        '{"seq":2,"kind":"transfer","t0":4,"t1":5,"src_dev":0,"dst_dev":1,'
        '"src_addr":4096,"dst_addr":8192,"bytes":8,"hash":9,"codeptr":0}',
    ]
    path = tmp_path / "warny.trace"
    path.write_text("\n".join(lines) + "\n")
    assert main(["analyze", str(path)]) == 0
    loud = capsys.readouterr()
    assert "warning" in loud.err
    assert main(["analyze", "-q", str(path)]) == 0
    quiet = capsys.readouterr()
    assert "warning" not in quiet.err
    assert quiet.out == loud.out  # findings and exit codes unchanged


def test_quiet_and_verbose_mutually_exclusive(listing1_trace, capsys):
    path, *_ = listing1_trace
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "-q", "-v", str(path)])
    assert exc.value.code == 2
    assert "not allowed" in capsys.readouterr().err


def test_gen_writes_truth_sidecar(tmp_path):
    path = tmp_path / "g.trace"
    assert main(["gen", str(path), "--pattern", "listing2", "--iterations", "5"]) == 0
    truth = json.loads((tmp_path / "g.trace.truth.json").read_text())
    assert truth["ra_pairs"] == 5 and truth["rt_pairs"] == 4


def test_gen_optimized_variant(tmp_path, capsys):
    path = tmp_path / "opt.trace"
    assert main(["gen", str(path), "--pattern", "listing1", "--optimized"]) == 0
    assert main(["analyze", str(path)]) == 0
    assert capsys.readouterr().out.count("(none detected)") == 5


def test_gen_invalid_spec_exits_1(tmp_path, capsys):
    assert main(["gen", str(tmp_path / "x.trace"), "--devices", "1"]) == 1
    assert "error" in capsys.readouterr().err


def test_gen_then_analyze_ground_truth(tmp_path, capsys):
    path = tmp_path / "mixed.trace"
    assert main(["gen", str(path), "--pattern", "mixed", "--iterations", "4",
                 "--devices", "3", "--seed", "9"]) == 0
    truth = json.loads((tmp_path / "mixed.trace.truth.json").read_text())
    assert main(["analyze", "--json", "--oracle", str(path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["finding_counts"]["UA"] == truth["ua_pairs"]
    assert doc["savings"]["union_ns"] == truth["expected_union_savings_ns"]


def test_audit_clean_then_corrupted(tmp_path, capsys, listing1_trace):
    path, trace, _, payloads = listing1_trace
    payload_dir = tmp_path / "payloads"
    payload_dir.mkdir()
    for seq, payload in payloads.items():
        (payload_dir / f"{seq}.bin").write_bytes(payload)
    assert main(["audit", str(path), "--payload-dir", str(payload_dir)]) == 0
    assert "collision_count: 0" in capsys.readouterr().out

    # corrupt the second occurrence of the duplicated payload
    dup_seqs = [seq for seq, p in payloads.items()
                if list(payloads.values()).count(p) > 1]
    victim = max(dup_seqs)
    (payload_dir / f"{victim}.bin").write_bytes(b"\xff" * 16)
    assert main(["audit", str(path), "--payload-dir", str(payload_dir)]) == 0
    assert "collision_count: 1" in capsys.readouterr().out


def test_audit_missing_sidecars_warn(tmp_path, capsys, listing1_trace):
    path, *_ = listing1_trace
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["audit", str(path), "--payload-dir", str(empty)]) == 0
    captured = capsys.readouterr()
    assert "collision_count: 0" in captured.out
    assert "no payload sidecar" in captured.err


def test_dmlens_color_env(monkeypatch, listing1_trace, capsys):
    path, *_ = listing1_trace
    monkeypatch.setenv("DMLENS_COLOR", "always")
    assert main(["analyze", str(path)]) == 0
    assert "\033[1m" in capsys.readouterr().out
    monkeypatch.setenv("DMLENS_COLOR", "never")
    assert main(["analyze", str(path)]) == 0
    assert "\033[1m" not in capsys.readouterr().out


def test_internal_error_exits_2(tmp_path, capsys, monkeypatch, listing1_trace):
    path, *_ = listing1_trace
    import dmlens.cli as cli_mod

    def boom(*a, **k):
        raise RuntimeError("synthetic fault")

    monkeypatch.setattr(cli_mod, "estimate", boom)
    assert main(["analyze", str(path)]) == 2
    assert "internal error" in capsys.readouterr().err
