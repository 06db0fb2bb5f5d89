"""Trace tool definitions and handlers — status, tail."""

from __future__ import annotations

from typing import Any

from mcp.types import Tool

from relevance_mcp_server.helpers import _ok, package_version
from relevance_mcp_server.state import RunState
from relevance_mcp_server.trace import get_call_log

TOOLS: list[Tool] = [
    Tool(
        name="relevance.trace.status",
        description=(
            "Return call counts by verdict and error code, the log file, server version and the "
            "active run configuration."
        ),
        inputSchema={"type": "object", "properties": {}, "required": []},
    ),
    Tool(
        name="relevance.trace.tail",
        description=(
            "Return the last N call records (default 50): input shapes, certified outcome and "
            "duration, optionally only for one tool."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "n": {
                    "type": ["integer", "string"],
                    "description": "Number of recent records to return (default 50).",
                    "default": 50,
                },
                "tool": {"type": "string", "description": "Only records for this tool name."},
            },
            "required": [],
        },
    ),
]


async def handle_trace_status(state: RunState, _args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.config
    run = {"budget": cfg.budget, "subset_cap": cfg.subset_cap, "seed": cfg.seed, "self_check": cfg.self_check}
    log = get_call_log()
    if log is None:
        return _ok(enabled=False, version=package_version(), run=run)
    return _ok(**log.status(), version=package_version(), run=run)


async def handle_trace_tail(_state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    log = get_call_log()
    if log is None:
        return _ok(enabled=False, records=[])
    n = int(args.get("n", 50))
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return _ok(records=log.tail(n, args.get("tool") or None))


HANDLERS: dict[str, Any] = {
    "relevance.trace.status": handle_trace_status,
    "relevance.trace.tail": handle_trace_tail,
}
