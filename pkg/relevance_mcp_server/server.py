"""Relevance MCP server – stdio transport, certification and obstruction tools."""

from __future__ import annotations

import asyncio
import logging
import os
import sys
import time
from typing import Any

import anyio
from mcp.server import NotificationOptions, Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from relevance_mcp_server import handlers_certify, handlers_trace, handlers_witness
from relevance_mcp_server.helpers import MAX_STATES, SUBSET_CAP, TheoryViolation, _err, _result_text
from relevance_mcp_server.state import RunState
from relevance_mcp_server.trace import get_call_log, init_call_log

# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------

_LOG_LEVEL = os.environ.get("RELEVANCE_MCP_LOG_LEVEL", "WARNING").upper()
logging.basicConfig(
    level=getattr(logging, _LOG_LEVEL, logging.WARNING),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger("relevance_mcp_server")

# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

TOOLS: list[Tool] = handlers_certify.TOOLS + handlers_witness.TOOLS + handlers_trace.TOOLS
HANDLERS: dict[str, Any] = {
    **handlers_certify.HANDLERS,
    **handlers_witness.HANDLERS,
    **handlers_trace.HANDLERS,
}


async def call_tool(
    state: RunState,
    name: str,
    arguments: dict[str, Any] | None,
    handlers: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Run one tool and map every failure onto an error envelope.

    Shared by the MCP server and the batch CLI; a call is logged only when the
    server started its call log.
    """
    arguments = arguments or {}
    handlers = HANDLERS if handlers is None else handlers

    t0 = time.monotonic()

    handler = handlers.get(name)
    if handler is None:
        result = _err("unknown_tool", f"No tool named {name}")
    else:
        try:
            result = await handler(state, arguments)
        except KeyError as exc:
            result = _err("not_found", str(exc).strip("'\""))
        except TheoryViolation as exc:
            logger.error("Theory violation in %s: %s", name, exc)
            result = _err("theory_violation", str(exc), witness=exc.witness)
        except (ValueError, TypeError) as exc:
            result = _err("invalid_params", str(exc))
        except RuntimeError as exc:
            result = _err("limit_reached", str(exc))
        except Exception as exc:
            logger.error("Unhandled error in %s: %s", name, exc, exc_info=True)
            result = _err("internal", f"Internal error in {name}. Check server logs for details.")

    log = get_call_log()
    if log:
        log.record(name, arguments, result, round((time.monotonic() - t0) * 1000, 1))
    return result


# ---------------------------------------------------------------------------
# Server construction
# ---------------------------------------------------------------------------


def build_server(state: RunState | None = None) -> tuple[Server, RunState]:
    state = state or RunState()
    server = Server("relevance-mcp-server")

    @server.list_tools()
    async def _list_tools() -> list[Tool]:
        return TOOLS

    @server.call_tool()
    async def _call_tool(name: str, arguments: dict[str, Any] | None) -> list[TextContent]:
        result = await call_tool(state, name, arguments)
        # artifacts duplicate a field already in the payload
        result.pop("artifact", None)
        return _result_text(result)

    init_call_log()
    return server, state


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


async def _run() -> None:
    server, _state = build_server()

    logger.info("Starting Relevance MCP server (max_states=%s, subset_cap=%s)", MAX_STATES, SUBSET_CAP)

    _BENIGN_ASYNC = (EOFError, BrokenPipeError, anyio.ClosedResourceError, anyio.BrokenResourceError)

    try:
        async with stdio_server() as (read_stream, write_stream):
            init_options = server.create_initialization_options(
                notification_options=NotificationOptions(tools_changed=False),
            )
            await server.run(read_stream, write_stream, init_options)
    except _BENIGN_ASYNC:
        pass
    except BaseExceptionGroup as eg:
        # anyio wraps stream-closure errors in ExceptionGroup on Python 3.11+.
        if not all(isinstance(e, _BENIGN_ASYNC) for e in eg.exceptions):
            raise
    finally:
        log = get_call_log()
        if log:
            try:
                log.close()
            except Exception:
                pass


_BENIGN_SYNC = (
    KeyboardInterrupt,
    BrokenPipeError,
    EOFError,
    ConnectionError,
    anyio.ClosedResourceError,
    anyio.BrokenResourceError,
)


def main() -> None:
    try:
        asyncio.run(_run())
    except _BENIGN_SYNC:
        pass
    except BaseExceptionGroup as eg:
        if not all(isinstance(e, _BENIGN_SYNC) for e in eg.exceptions):
            raise


if __name__ == "__main__":
    main()
