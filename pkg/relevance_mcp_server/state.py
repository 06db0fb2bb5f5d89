"""Run configuration shared by the MCP server and the batch CLI."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any

from relevance_mcp_server.helpers import (
    MAX_STATES,
    SEED,
    SELF_CHECK,
    SUBSET_CAP,
    _coerce_bool,
)

logger = logging.getLogger("relevance_mcp_server")

OUTPUT_FORMATS = ("human", "json")


@dataclass(frozen=True)
class RunConfig:
    budget: int = MAX_STATES
    subset_cap: int = SUBSET_CAP
    seed: int = SEED
    format: str = "human"
    self_check: bool = SELF_CHECK

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.subset_cap < 0:
            raise ValueError(f"subset_cap must be >= 0, got {self.subset_cap}")
        if self.format not in OUTPUT_FORMATS:
            raise ValueError(f"format must be one of {OUTPUT_FORMATS}, got {self.format!r}")


class RunState:
    """Holds the active :class:`RunConfig`; tool arguments may override it per call."""

    def __init__(self, config: RunConfig | None = None) -> None:
        self.config = config or RunConfig()

    def for_call(self, args: dict[str, Any]) -> RunConfig:
        overrides: dict[str, Any] = {}
        for key in ("budget", "subset_cap", "seed"):
            if args.get(key) is not None:
                overrides[key] = int(args[key])
        if args.get("self_check") is not None:
            overrides["self_check"] = _coerce_bool(args["self_check"])
        return replace(self.config, **overrides) if overrides else self.config
