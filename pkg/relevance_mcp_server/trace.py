"""Certification run log: one JSONL record per tool call.

A record names the tool, the shape of every document it was handed (kind,
state and action counts, never the utilities) and what the call certified.
Records live in a bounded in-memory log and are appended to
``.relevance_mcp/traces/trace.jsonl``. ``RELEVANCE_MCP_TRACE=0`` turns the log
off; the batch CLI never starts one.
"""

from __future__ import annotations

import collections
import json
import math
import os
from collections.abc import Mapping
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

TRACE_ENABLED = os.environ.get("RELEVANCE_MCP_TRACE", "1").lower() not in ("0", "false", "no")

_DOCUMENT_KEYS = ("document", "other", "trace", "bundle", "scheme", "slice", "spec", "universe", "witness")
_OUTCOME_KEYS = ("tier", "m", "srank", "relevant", "within_capacity", "verdict", "found")


# ---------------------------------------------------------------------------
# Record fields
# ---------------------------------------------------------------------------


def _count(value: Any) -> int | None:
    return len(value) if isinstance(value, list | tuple | Mapping) else None


def document_shape(doc: Any) -> Any:
    """Kind and size of an inline document; a file path is kept as given."""
    if not isinstance(doc, Mapping):
        return doc
    shape: dict[str, Any] = {"kind": doc.get("kind", "document")}
    domains, carrier, d = doc.get("domains"), doc.get("carrier"), doc.get("d")
    if isinstance(carrier, list):
        shape["states"] = len(carrier)
    elif isinstance(domains, list) and all(isinstance(k, int) for k in domains):
        shape["states"] = math.prod(domains)
    elif isinstance(d, int) and not isinstance(d, bool) and 0 <= d <= 64:
        shape["states"] = 2**d
    for key, label in (("actions", "actions"), ("members", "members"), ("steps", "steps")):
        n = _count(doc.get(key))
        if n is not None:
            shape[label] = n
    return shape


def call_outcome(result: Mapping[str, Any]) -> dict[str, Any]:
    """What a result envelope certified, or the error code it failed with."""
    if not result.get("ok"):
        error = result.get("error")
        return {"ok": False, "error_code": error.get("code") if isinstance(error, Mapping) else None}
    out: dict[str, Any] = {"ok": True}
    out.update((k, result[k]) for k in _OUTCOME_KEYS if k in result)
    certificate = result.get("certificate")
    if isinstance(certificate, Mapping) and "verdict" in certificate:
        out["verdict"] = certificate["verdict"]
    report = result.get("report")
    if isinstance(report, Mapping) and "passed" in report:
        out["passed"] = report["passed"]
    return out


# ---------------------------------------------------------------------------
# CallLog
# ---------------------------------------------------------------------------


class CallLog:
    """Bounded log of tool-call records with an optional JSONL file sink."""

    def __init__(self, max_items: int = 2000, file_path: str | None = None) -> None:
        self._records: collections.deque[dict[str, Any]] = collections.deque(maxlen=max_items)
        self._verdicts: collections.Counter[str] = collections.Counter()
        self._errors: collections.Counter[str] = collections.Counter()
        self._file_path = file_path
        self._fh = None
        if file_path:
            Path(file_path).parent.mkdir(parents=True, exist_ok=True)
            # O_NOFOLLOW refuses a symlinked log file at open time
            flags = os.O_WRONLY | os.O_APPEND | os.O_CREAT | getattr(os, "O_NOFOLLOW", 0)
            fd = os.open(file_path, flags, 0o644)
            self._fh = os.fdopen(fd, "a", encoding="utf-8")

    def record(
        self, tool: str, args: Mapping[str, Any], result: Mapping[str, Any], duration_ms: float
    ) -> dict[str, Any]:
        inputs = {k: document_shape(args[k]) for k in _DOCUMENT_KEYS if k in args}
        entry = {
            "ts": datetime.now(UTC).isoformat(),
            "tool": tool,
            "inputs": inputs,
            **call_outcome(result),
            "duration_ms": duration_ms,
        }
        if entry["ok"]:
            self._verdicts[str(entry.get("verdict", "ok"))] += 1
        else:
            self._errors[str(entry["error_code"])] += 1
        self._records.append(entry)
        if self._fh:
            self._fh.write(json.dumps(entry, default=str) + "\n")
            self._fh.flush()
        return entry

    def tail(self, n: int = 50, tool: str | None = None) -> list[dict[str, Any]]:
        if n <= 0:
            return []
        items = [e for e in self._records if tool is None or e["tool"] == tool]
        return items[-n:]

    def status(self) -> dict[str, Any]:
        return {
            "enabled": True,
            "calls": sum(self._verdicts.values()) + sum(self._errors.values()),
            "retained": len(self._records),
            "verdicts": dict(self._verdicts),
            "errors": dict(self._errors),
            "file_path": self._file_path,
        }

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    def __del__(self) -> None:
        self.close()


# ---------------------------------------------------------------------------
# Module-level singleton
# ---------------------------------------------------------------------------

_log: CallLog | None = None


def get_call_log() -> CallLog | None:
    return _log


def init_call_log() -> CallLog | None:
    """Start the server's log under the workspace; None when tracing is off."""
    global _log
    if not TRACE_ENABLED:
        return None
    from relevance_mcp_server.documents import resolve_workspace_root

    _log = CallLog(file_path=str(resolve_workspace_root() / "traces" / "trace.jsonl"))
    return _log
