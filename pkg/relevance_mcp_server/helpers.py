"""Shared helpers, configuration, errors, and response builders."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from typing import Any

from mcp.types import TextContent

logger = logging.getLogger("relevance_mcp_server")

# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _env_int(name: str, default: int, minimum: int) -> int:
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Invalid %s=%r, defaulting to %d.", name, raw, default)
        return default
    if value < minimum:
        logger.warning("%s=%d is below %d, defaulting to %d.", name, value, minimum, default)
        return default
    return value


MAX_STATES = _env_int("RELEVANCE_MCP_MAX_STATES", 2**20, minimum=1)
SUBSET_CAP = _env_int("RELEVANCE_MCP_SUBSET_CAP", 10, minimum=0)
SEED = _env_int("RELEVANCE_MCP_SEED", 0, minimum=0)
SELF_CHECK = os.environ.get("RELEVANCE_MCP_SELF_CHECK", "").lower() in ("1", "true", "yes")


def resolve_budget(budget: int | None) -> int:
    return MAX_STATES if budget is None else budget


def resolve_subset_cap(subset_cap: int | None) -> int:
    return SUBSET_CAP if subset_cap is None else subset_cap


def package_version() -> str:
    try:
        return version("relevance-mcp-server")
    except PackageNotFoundError:
        return "0.0.0+unknown"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class DomainError(ValueError):
    """An input violates an operation's precondition."""


class UnsupportedStepError(DomainError):
    """A closure step was applied to an object tier that cannot carry it."""


class TraceStepError(DomainError):
    def __init__(self, index: int, cause: Exception) -> None:
        super().__init__(f"step {index}: {cause}")
        self.index = index
        self.cause = cause


class DocumentError(DomainError):
    """A document failed to parse; the message names the offending field."""


class BudgetExceededError(RuntimeError):
    def __init__(self, requested: int, limit: int, what: str = "states") -> None:
        super().__init__(
            f"Enumeration of {requested} {what} exceeds the budget of {limit}. "
            "Raise --budget or RELEVANCE_MCP_MAX_STATES to allow it."
        )
        self.requested = requested
        self.limit = limit


class TheoryViolation(Exception):  # noqa: N818
    """A brute-force self-check contradicted a structural guarantee."""

    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


# ---------------------------------------------------------------------------
# Check reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class CheckReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(f"No check named {name}")

    def raise_for_violation(self) -> None:
        bad = self.failed()
        if bad:
            raise TheoryViolation(
                f"check {bad[0].name!r} failed",
                witness=[c.to_dict() for c in bad],
            )

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


# ---------------------------------------------------------------------------
# Response builders
# ---------------------------------------------------------------------------


def _coerce_bool(value: Any) -> bool:
    """Coerce a value to bool, handling string representations."""
    if isinstance(value, str):
        return value.lower() not in ("false", "0", "")
    return bool(value)


def _ok(**kwargs: Any) -> dict[str, Any]:
    return {"ok": True, **kwargs}


def _err(code: str, message: str, **extra: Any) -> dict[str, Any]:
    return {"ok": False, "error": {"code": code, "message": message}, **extra}


def _result_text(payload: dict[str, Any]) -> list[TextContent]:
    return [TextContent(type="text", text=json.dumps(payload, default=str))]
