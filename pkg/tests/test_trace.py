"""Tests for relevance_mcp_server.trace and the trace tools."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from relevance_mcp_server.handlers_trace import handle_trace_status, handle_trace_tail
from relevance_mcp_server.state import RunConfig, RunState
from relevance_mcp_server.trace import CallLog, call_outcome, document_shape, get_call_log, init_call_log

ANALYZED = {"ok": True, "tier": "product", "m": 2, "relevant": [0], "states": [[0, 0]]}
FAILED = {"ok": False, "error": {"code": "not_found", "message": "no such file"}}

# ---------------------------------------------------------------------------
# Record fields
# ---------------------------------------------------------------------------


class TestDocumentShape:
    def test_problem_counts_states_from_domains(self):
        doc = {"domains": [2, 3], "actions": ["a", "b"], "utilities": [[0] * 6, [1] * 6]}
        assert document_shape(doc) == {"kind": "document", "states": 6, "actions": 2}

    def test_carrier_wins_over_domains(self):
        doc = {"domains": [2, 2], "carrier": [[0, 0], [1, 1]], "actions": ["a"]}
        assert document_shape(doc)["states"] == 2

    def test_slice_counts_the_cube(self):
        doc = {"kind": "slice", "d": 3, "actions": [{"name": "a"}, {"name": "b"}]}
        assert document_shape(doc) == {"kind": "slice", "states": 8, "actions": 2}

    def test_universe_counts_members(self):
        assert document_shape({"kind": "universe", "members": [{}, {}, {}]}) == {
            "kind": "universe",
            "members": 3,
        }

    def test_utilities_never_recorded(self):
        shape = document_shape({"domains": [2], "actions": ["a"], "utilities": [[5, 7]]})
        assert "utilities" not in shape

    def test_path_passes_through(self):
        assert document_shape("problems/standing.json") == "problems/standing.json"


class TestCallOutcome:
    def test_keeps_certified_fields_only(self):
        assert call_outcome(ANALYZED) == {"ok": True, "tier": "product", "m": 2, "relevant": [0]}

    def test_certificate_verdict_lifted(self):
        out = call_outcome({"ok": True, "certificate": {"verdict": "sufficient", "witnesses": []}})
        assert out == {"ok": True, "verdict": "sufficient"}

    def test_report_passed_lifted(self):
        assert call_outcome({"ok": True, "report": {"passed": False, "checks": []}})["passed"] is False

    def test_error_code(self):
        assert call_outcome(FAILED) == {"ok": False, "error_code": "not_found"}


# ---------------------------------------------------------------------------
# CallLog basics
# ---------------------------------------------------------------------------


class TestCallLog:
    def test_record_and_tail(self):
        log = CallLog()
        entry = log.record("relevance.analyze", {"document": {"domains": [2, 2], "actions": ["a"]}}, ANALYZED, 1.5)
        assert entry["tool"] == "relevance.analyze"
        assert entry["inputs"] == {"document": {"kind": "document", "states": 4, "actions": 1}}
        assert entry["relevant"] == [0]
        assert entry["duration_ms"] == 1.5
        assert "ts" in entry
        assert log.tail() == [entry]

    def test_non_document_args_left_out(self):
        entry = CallLog().record("relevance.graph", {"document": "p.json", "budget": 64}, {"ok": True}, 0)
        assert entry["inputs"] == {"document": "p.json"}

    def test_tail_limit(self):
        log = CallLog()
        for i in range(10):
            log.record("relevance.analyze", {}, {"ok": True, "m": i}, 0)
        assert [e["m"] for e in log.tail(3)] == [7, 8, 9]
        assert log.tail(0) == []

    def test_tail_by_tool(self):
        log = CallLog()
        log.record("relevance.analyze", {}, ANALYZED, 0)
        log.record("relevance.graph", {}, {"ok": True}, 0)
        log.record("relevance.analyze", {}, FAILED, 0)
        assert [e["ok"] for e in log.tail(10, "relevance.analyze")] == [True, False]

    def test_status_counts_verdicts_and_errors(self):
        log = CallLog()
        log.record("relevance.certify", {}, {"ok": True, "certificate": {"verdict": "sufficient"}}, 0)
        log.record("relevance.certify", {}, {"ok": True, "certificate": {"verdict": "sufficient"}}, 0)
        log.record("relevance.graph", {}, {"ok": True}, 0)
        log.record("relevance.analyze", {}, FAILED, 0)
        status = log.status()
        assert status["enabled"] is True
        assert status["calls"] == 4
        assert status["verdicts"] == {"sufficient": 2, "ok": 1}
        assert status["errors"] == {"not_found": 1}
        assert status["file_path"] is None

    def test_ring_eviction_keeps_counts(self):
        log = CallLog(max_items=5)
        for i in range(10):
            log.record("relevance.analyze", {}, {"ok": True, "m": i}, 0)
        assert [e["m"] for e in log.tail(10)] == [5, 6, 7, 8, 9]
        assert log.status()["calls"] == 10
        assert log.status()["retained"] == 5

    def test_rejects_symlink_path(self, tmp_path: Path):
        real_file = tmp_path / "real.jsonl"
        real_file.touch()
        link = tmp_path / "link.jsonl"
        link.symlink_to(real_file)
        with pytest.raises((OSError, ValueError)):
            CallLog(file_path=str(link))

    def test_file_sink(self, tmp_path: Path):
        trace_file = tmp_path / "trace.jsonl"
        log = CallLog(file_path=str(trace_file))
        log.record("relevance.analyze", {}, ANALYZED, 0)
        log.record("relevance.analyze", {}, FAILED, 0)
        log.close()

        lines = [json.loads(line) for line in trace_file.read_text().strip().splitlines()]
        assert [line["ok"] for line in lines] == [True, False]
        assert lines[1]["error_code"] == "not_found"

    def test_close_idempotent(self, tmp_path: Path):
        log = CallLog(file_path=str(tmp_path / "trace.jsonl"))
        log.close()
        log.close()


# ---------------------------------------------------------------------------
# init_call_log
# ---------------------------------------------------------------------------


class TestInitCallLog:
    def test_returns_none_when_disabled(self, monkeypatch):
        monkeypatch.setattr("relevance_mcp_server.trace.TRACE_ENABLED", False)
        assert init_call_log() is None
        assert get_call_log() is None

    def test_creates_log_under_workspace(self, monkeypatch, tmp_path: Path):
        monkeypatch.setattr("relevance_mcp_server.trace.TRACE_ENABLED", True)
        root = tmp_path / "ws"
        monkeypatch.setenv("RELEVANCE_MCP_ROOT", str(root))
        log = init_call_log()
        assert log is not None
        assert log is get_call_log()
        assert (root / "traces" / "trace.jsonl").parent.is_dir()
        log.close()


# ---------------------------------------------------------------------------
# Trace tools
# ---------------------------------------------------------------------------


class TestTraceHandlers:
    async def test_status_disabled(self):
        result = await handle_trace_status(RunState(), {})
        assert result["ok"] is True
        assert result["enabled"] is False
        assert "version" in result

    async def test_status_reports_run_config(self, monkeypatch):
        log = CallLog()
        log.record("relevance.analyze", {}, FAILED, 0)
        monkeypatch.setattr("relevance_mcp_server.trace._log", log)
        state = RunState(RunConfig(budget=99, subset_cap=4, seed=3))
        result = await handle_trace_status(state, {})
        assert result["enabled"] is True
        assert result["calls"] == 1
        assert result["errors"] == {"not_found": 1}
        assert result["run"]["budget"] == 99
        assert result["run"]["seed"] == 3

    async def test_tail_disabled(self):
        result = await handle_trace_tail(RunState(), {})
        assert result == {"ok": True, "enabled": False, "records": []}

    async def test_tail_enabled(self, monkeypatch):
        log = CallLog()
        log.record("relevance.hull", {}, {"ok": True, "found": True}, 0)
        log.record("relevance.verify", {}, {"ok": True}, 0)
        monkeypatch.setattr("relevance_mcp_server.trace._log", log)
        result = await handle_trace_tail(RunState(), {"n": "10", "tool": "relevance.hull"})
        assert [e["found"] for e in result["records"]] == [True]

    async def test_negative_tail_rejected(self, monkeypatch):
        monkeypatch.setattr("relevance_mcp_server.trace._log", CallLog())
        with pytest.raises(ValueError):
            await handle_trace_tail(RunState(), {"n": -1})
