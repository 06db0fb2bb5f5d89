"""Unit tests for envelope helpers, call_tool error mapping and build_server wiring."""

import json

import pytest

from relevance_mcp_server.helpers import BudgetExceededError, DomainError, TheoryViolation, _err, _ok, _result_text
from relevance_mcp_server.server import HANDLERS, TOOLS, build_server, call_tool
from relevance_mcp_server.state import RunState
from relevance_mcp_server.trace import CallLog

# ---------------------------------------------------------------------------
# Result format tests
# ---------------------------------------------------------------------------


class TestResultFormat:
    def test_ok_shape(self):
        assert _ok(foo="bar") == {"ok": True, "foo": "bar"}

    def test_err_shape(self):
        r = _err("some_code", "some message")
        assert r == {"ok": False, "error": {"code": "some_code", "message": "some message"}}

    def test_result_text_is_json(self):
        payload = {"ok": True, "x": 1}
        texts = _result_text(payload)
        assert len(texts) == 1
        assert json.loads(texts[0].text) == payload


# ---------------------------------------------------------------------------
# Tool registry
# ---------------------------------------------------------------------------


class TestRegistry:
    def test_every_tool_has_a_handler(self):
        names = [t.name for t in TOOLS]
        assert len(names) == len(set(names))
        assert set(names) == set(HANDLERS)

    def test_tool_names_are_namespaced(self):
        assert all(t.name.startswith("relevance.") for t in TOOLS)


# ---------------------------------------------------------------------------
# call_tool error mapping
# ---------------------------------------------------------------------------


def _raising(exc: BaseException):
    async def handler(_state, _args):
        raise exc

    return {"t": handler}


class TestCallTool:
    @pytest.mark.parametrize(
        ("exc", "code"),
        [
            (KeyError("No such document: x.json"), "not_found"),
            (DomainError("bad input"), "invalid_params"),
            (TypeError("wrong type"), "invalid_params"),
            (BudgetExceededError(10, 5), "limit_reached"),
            (ZeroDivisionError("boom"), "internal"),
        ],
    )
    async def test_exception_mapping(self, exc, code):
        result = await call_tool(RunState(), "t", {}, _raising(exc))
        assert result["ok"] is False
        assert result["error"]["code"] == code

    async def test_not_found_message_unquoted(self):
        result = await call_tool(RunState(), "t", {}, _raising(KeyError("No such document: x.json")))
        assert result["error"]["message"] == "No such document: x.json"

    async def test_theory_violation_carries_witness(self):
        result = await call_tool(RunState(), "t", {}, _raising(TheoryViolation("mismatch", witness={"s": [0]})))
        assert result["error"]["code"] == "theory_violation"
        assert result["witness"] == {"s": [0]}

    async def test_internal_errors_hide_details(self):
        result = await call_tool(RunState(), "t", {}, _raising(ZeroDivisionError("secret")))
        assert "secret" not in result["error"]["message"]

    async def test_unknown_tool(self):
        result = await call_tool(RunState(), "relevance.nope", {})
        assert result["error"]["code"] == "unknown_tool"

    async def test_analyze_standing_example(self, load_fixture):
        result = await call_tool(RunState(), "relevance.analyze", {"document": load_fixture("standing_example.json")})
        assert result["ok"] is True
        assert result["relevant"] == [0]
        assert result["m"] == 2
        assert result["tier"] == "product"

    async def test_call_log_records(self, monkeypatch, load_fixture):
        log = CallLog()
        monkeypatch.setattr("relevance_mcp_server.trace._log", log)
        await call_tool(RunState(), "relevance.analyze", {"document": load_fixture("standing_example.json")})
        await call_tool(RunState(), "relevance.nope", {})
        analyzed, failed = log.tail(10)
        assert analyzed["tool"] == "relevance.analyze"
        assert analyzed["inputs"]["document"] == {"kind": "problem", "states": 4, "actions": 2}
        assert analyzed["ok"] is True
        assert analyzed["relevant"] == [0]
        assert analyzed["duration_ms"] >= 0
        assert failed["error_code"] == "unknown_tool"


# ---------------------------------------------------------------------------
# build_server wiring
# ---------------------------------------------------------------------------


class TestBuildServer:
    def test_build_server_returns_server_and_state(self, monkeypatch):
        monkeypatch.setattr("relevance_mcp_server.trace.TRACE_ENABLED", False)
        server, state = build_server()
        assert server.name == "relevance-mcp-server"
        assert isinstance(state, RunState)

    def test_build_server_keeps_given_state(self, monkeypatch, run_state):
        monkeypatch.setattr("relevance_mcp_server.trace.TRACE_ENABLED", False)
        _, state = build_server(run_state)
        assert state is run_state
