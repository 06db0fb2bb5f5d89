"""Batch command-line surface over the relevance tool handlers.

Usage::

    relevance analyze problem.json
    relevance witness dominant_pair -n 3 --format json --out bundle.json
    relevance verify bundle.json

Every subcommand calls the same handler the MCP server exposes, so the two
surfaces share validation and error codes.  Exit status follows the error
code of the result envelope.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from relevance_mcp_server.documents import dump_document
from relevance_mcp_server.handlers_certify import REDUCE_OPERATIONS
from relevance_mcp_server.helpers import _err, package_version
from relevance_mcp_server.obstruction import FAMILY_KINDS
from relevance_mcp_server.pairwise import GRAPH_MODES, TARGET_KINDS
from relevance_mcp_server.reductions import PRESENTATION_MODES
from relevance_mcp_server.server import call_tool
from relevance_mcp_server.stability import FLIP_KINDS
from relevance_mcp_server.state import OUTPUT_FORMATS, RunConfig, RunState
from relevance_mcp_server.taxonomy import MECHANISMS

logger = logging.getLogger("relevance_mcp_server.cli")

EXIT_CODES: dict[str, int] = {
    "invalid_params": 1,
    "not_found": 1,
    "unknown_tool": 1,
    "internal": 1,
    "limit_reached": 2,
    "theory_violation": 3,
    "verification_failed": 4,
}

# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures and exit 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_csv(value: str) -> list[int]:
    try:
        return [int(v) for v in _csv(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def _blocks(value: str) -> list[list[list[int]]]:
    """``00,01;10,11`` -> two blocks of digit-string states."""
    try:
        return [[[int(ch) for ch in s] for s in _csv(block)] for block in value.split(";") if block.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ';'-separated blocks of digit states, got {value!r}") from None


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS, help="max states to enumerate")
    common.add_argument(
        "--subset-cap", type=int, default=argparse.SUPPRESS, help="max dimension for full subset scans"
    )
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random generator")
    common.add_argument("--format", choices=OUTPUT_FORMATS, default=argparse.SUPPRESS)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="write the produced artifact here")
    common.add_argument(
        "--self-check", action="store_true", default=argparse.SUPPRESS, help="enable brute-force self-checks"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="relevance", description="Exact relevance certification for finite decision problems.")
    parser.add_argument("--version", action="version", version=package_version())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="quotient and certification profile")
    p.add_argument("document")
    p.add_argument("--coords", type=_int_csv, help="also test sufficiency of these coordinates")
    p.add_argument("--summary", type=_csv, help="per-state summary symbols to test against the quotient")

    p = sub.add_parser("witness", parents=[common], help="build an orbit-gap witness bundle")
    p.add_argument("kind", choices=FAMILY_KINDS)
    p.add_argument("-n", type=int, default=3)

    p = sub.add_parser("verify", parents=[common], help="re-check a witness bundle")
    p.add_argument("bundle")

    p = sub.add_parser("graph", parents=[common], help="interaction graph as DOT")
    p.add_argument("document")
    p.add_argument("--mode", choices=GRAPH_MODES, default="raw")
    p.add_argument("--dichotomy", action="store_true")

    p = sub.add_parser("transform", parents=[common], help="apply a closure trace and check invariance")
    p.add_argument("document")
    p.add_argument("trace")

    p = sub.add_parser("reduce", parents=[common], help="semantic reductions")
    p.add_argument("operation", choices=REDUCE_OPERATIONS)
    p.add_argument("document", nargs="?", help="problem/slice, or the spec for induce and transfer")
    p.add_argument("--mode", choices=PRESENTATION_MODES, default="binary")
    p.add_argument("--domains", type=_int_csv)
    p.add_argument("--labels", type=_csv)
    p.add_argument("--blocks", type=_blocks)

    p = sub.add_parser("stability", parents=[common], help="perturbation certificate or flip pair")
    p.add_argument("document", nargs="?")
    p.add_argument("other", nargs="?")
    p.add_argument("--witness", help="relevance or non-sufficiency witness document")
    p.add_argument("--flip", choices=FLIP_KINDS, help="build a flip pair instead")
    p.add_argument("--epsilon", help="flip distance, e.g. 1/10")

    p = sub.add_parser("classify", parents=[common], help="evaluate a scheme or built-in predicate")
    p.add_argument("slice")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--scheme")
    target.add_argument("--kind", choices=TARGET_KINDS)

    p = sub.add_parser("falsify", parents=[common], help="search for an orbit gap of a classifier")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--scheme")
    target.add_argument("--kind", choices=TARGET_KINDS)
    p.add_argument("--dims", type=_int_csv)
    p.add_argument("--random-bases", type=int)
    p.add_argument("--max-candidates", type=int)
    p.add_argument("--time-limit", type=float, dest="time_limit_s")

    p = sub.add_parser("taxonomy", parents=[common], help="landscape table and mechanism detectors")
    p.add_argument("document", nargs="?")
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("-k", type=int)

    p = sub.add_parser("hull", parents=[common], help="closure hull and separability in a finite universe")
    p.add_argument("universe")
    p.add_argument("q", type=_int_csv, help="comma-separated member indices")
    p.add_argument("--domain", type=_int_csv, help="restrict to these closure-closed member indices first")
    return parser


# ---------------------------------------------------------------------------
# Command -> tool call
# ---------------------------------------------------------------------------

_TOOLS = {
    "analyze": "relevance.analyze",
    "witness": "relevance.witness",
    "verify": "relevance.verify",
    "graph": "relevance.graph",
    "transform": "relevance.transform",
    "reduce": "relevance.reduce",
    "stability": "relevance.stability",
    "classify": "relevance.classify",
    "falsify": "relevance.falsify",
    "taxonomy": "relevance.taxonomy",
    "hull": "relevance.hull",
}

_GLOBAL = {"command", "format", "out"}


def tool_arguments(ns: argparse.Namespace) -> dict[str, Any]:
    """Tool arguments for a parsed command line; unset options are omitted."""
    args = {k: v for k, v in vars(ns).items() if k not in _GLOBAL and v is not None and v is not False}
    if ns.command == "reduce" and "document" in args and ns.operation in ("induce", "transfer"):
        args["spec"] = args.pop("document")
    if ns.command == "stability" and "flip" in args:
        args["operation"] = "flip"
        args["kind"] = args.pop("flip")
    return args


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def render(result: dict[str, Any], fmt: str, seed: int) -> str:
    body = {k: v for k, v in result.items() if k != "artifact"}
    if fmt == "json":
        return dump_document({**body, "seed": seed, "version": package_version()})
    if not result.get("ok"):
        error = result["error"]
        head = f"error [{error['code']}]: {error['message']}"
    else:
        head = str(result.get("message", "ok"))
    details = {k: v for k, v in body.items() if k not in ("ok", "error", "message", "dot")}
    text = head + "\n"
    if "dot" in body:
        text += body["dot"].rstrip("\n") + "\n"
    if details:
        text += yaml.safe_dump(details, sort_keys=True, allow_unicode=True, default_flow_style=None)
    return text


def write_artifact(result: dict[str, Any], path: Path) -> None:
    artifact = result.get("artifact")
    if artifact is None:
        artifact = {k: v for k, v in result.items() if k not in ("ok", "message")}
    text = artifact if isinstance(artifact, str) else dump_document(artifact)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", path)


def exit_code(result: dict[str, Any]) -> int:
    if result.get("ok"):
        return 0
    return EXIT_CODES.get(result["error"]["code"], 1)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    status: int
    text: str
    to_stderr: bool = False


def run(argv: list[str] | None = None) -> Outcome:
    """Parse *argv* and run the command; nothing is printed."""
    ns = build_parser().parse_args(argv)
    state = RunState(RunConfig(format=getattr(ns, "format", "human")))
    arguments = tool_arguments(ns)
    seed = state.config.seed
    try:
        seed = state.for_call(arguments).seed
    except ValueError as exc:
        result = _err("invalid_params", str(exc))
    else:
        result = asyncio.run(call_tool(state, _TOOLS[ns.command], arguments))
    if result.get("ok") and getattr(ns, "out", None) is not None:
        write_artifact(result, ns.out)
    status = exit_code(result)
    fmt = state.config.format
    return Outcome(status, render(result, fmt, seed), to_stderr=status != 0 and fmt == "human")


def main(argv: list[str] | None = None) -> None:
    level = os.environ.get("RELEVANCE_MCP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )
    outcome = run(argv)
    (sys.stderr if outcome.to_stderr else sys.stdout).write(outcome.text)
    sys.exit(outcome.status)


if __name__ == "__main__":
    main()
