"""Obstruction tool definitions and handlers — witness, verify, classify, falsify, hull."""

from __future__ import annotations

import logging
from typing import Any

from mcp.types import Tool

from relevance_mcp_server.documents import (
    bundle_from_doc,
    bundle_to_doc,
    document_arg,
    scheme_from_doc,
    slice_from_doc,
    universe_from_doc,
)
from relevance_mcp_server.helpers import _err, _ok
from relevance_mcp_server.obstruction import (
    FAMILY_KINDS,
    SearchConfig,
    falsify_classifier,
    hull,
    hull_separation,
    make_family,
    verify_bundle,
)
from relevance_mcp_server.pairwise import TARGET_KINDS, target_predicate
from relevance_mcp_server.patterns import evaluate_scheme
from relevance_mcp_server.state import RunState

logger = logging.getLogger(__name__)

_DOC = {
    "type": ["object", "string"],
    "description": "Inline document, or a path to a JSON/YAML document file.",
}

# ---------------------------------------------------------------------------
# Tool definitions
# ---------------------------------------------------------------------------

TOOLS: list[Tool] = [
    Tool(
        name="relevance.witness",
        description=(
            "Build and verify an orbit-gap witness bundle for a built-in target predicate at dimension n: "
            "a base slice, an affine closure trace and the translated slice, with opposite predicate values "
            "and identical certification."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "kind": {"type": "string", "enum": list(FAMILY_KINDS)},
                "n": {"type": "integer", "minimum": 3, "default": 3},
            },
            "required": ["kind"],
        },
    ),
    Tool(
        name="relevance.verify",
        description=(
            "Re-check a witness bundle from scratch: trace replay, predicate flip and certification "
            "equality. Fails with verification_failed and the full report when any check fails."
        ),
        inputSchema={
            "type": "object",
            "properties": {"bundle": _DOC},
            "required": ["bundle"],
        },
    ),
    Tool(
        name="relevance.classify",
        description="Evaluate a bounded-pattern scheme, or a built-in target predicate, on a slice.",
        inputSchema={
            "type": "object",
            "properties": {
                "scheme": _DOC,
                "kind": {"type": "string", "enum": list(TARGET_KINDS)},
                "slice": _DOC,
            },
            "required": ["slice"],
        },
    ),
    Tool(
        name="relevance.falsify",
        description=(
            "Search for a closure-equivalent pair of slices on which a classifier disagrees. Returns a "
            "verified bundle, or found=false with search statistics. A miss never claims invariance."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "scheme": _DOC,
                "kind": {"type": "string", "enum": list(TARGET_KINDS)},
                "dims": {"type": "array", "items": {"type": "integer"}},
                "random_bases": {"type": "integer"},
                "max_candidates": {"type": "integer"},
                "time_limit_s": {"type": "number"},
                "seed": {"type": "integer"},
            },
            "required": [],
        },
    ),
    Tool(
        name="relevance.hull",
        description=(
            "Closure hull of a subset Q of a finite universe of slices, and whether Q is separable by a "
            "closure-invariant classifier (or the orbit-gap pair that prevents it)."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "universe": _DOC,
                "q": {"type": "array", "items": {"type": "integer"}},
                "domain": {
                    "type": "array",
                    "items": {"type": "integer"},
                    "description": "Restrict to these members first; they must be closed under the universe edges.",
                },
            },
            "required": ["universe", "q"],
        },
    ),
]

# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


async def handle_witness(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    kind = args.get("kind")
    n = int(args.get("n", 3))
    bundle = make_family(kind, n, budget=cfg.budget, subset_cap=cfg.subset_cap)
    doc = bundle_to_doc(bundle)
    return _ok(message=f"{kind} witness at n={n} verified", bundle=doc, artifact=doc)


async def handle_verify(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    bundle = bundle_from_doc(document_arg(args, "bundle"))
    report = verify_bundle(bundle, budget=cfg.budget, subset_cap=cfg.subset_cap)
    if not report.passed:
        names = ", ".join(c.name for c in report.failed())
        return _err("verification_failed", f"bundle failed: {names}", report=report.to_dict())
    return _ok(message=f"{bundle.kind} bundle verified", report=report.to_dict())


async def handle_classify(_state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    slc = slice_from_doc(document_arg(args, "slice"), "slice")
    if args.get("scheme") is not None:
        verdict = evaluate_scheme(scheme_from_doc(document_arg(args, "scheme")), slc)
        name = "scheme"
    elif args.get("kind") is not None:
        verdict = target_predicate(slc, args["kind"])
        name = args["kind"]
    else:
        raise ValueError("classify needs 'scheme' or 'kind'")
    return _ok(message=f"{name}: {verdict}", verdict=verdict)


async def handle_falsify(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    if args.get("scheme") is not None:
        target: Any = scheme_from_doc(document_arg(args, "scheme"))
    elif args.get("kind") is not None:
        target = args["kind"]
    else:
        raise ValueError("falsify needs 'scheme' or 'kind'")
    defaults = SearchConfig()
    config = SearchConfig(
        dims=tuple(int(d) for d in args.get("dims") or defaults.dims),
        random_bases=int(args.get("random_bases", defaults.random_bases)),
        max_candidates=int(args.get("max_candidates", defaults.max_candidates)),
        time_limit_s=float(args.get("time_limit_s", defaults.time_limit_s)),
        seed=cfg.seed,
    )
    result = falsify_classifier(target, config)
    # elapsed time stays in the logs so machine output is reproducible
    stats = {"bases": result.stats.bases, "candidates": result.stats.candidates, "stopped": result.stats.stopped}
    if result.bundle is None:
        return _ok(message=f"no witness found ({result.stats.stopped})", found=False, stats=stats, seed=cfg.seed)
    doc = bundle_to_doc(result.bundle)
    return _ok(
        message=f"witness found after {result.stats.candidates} candidates",
        found=True,
        bundle=doc,
        stats=stats,
        seed=cfg.seed,
        artifact=doc,
    )


async def handle_hull(_state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    universe = universe_from_doc(document_arg(args, "universe"))
    q = [int(i) for i in args.get("q") or []]
    names = tuple(range(len(universe.members)))
    if args.get("domain") is not None:
        hull(universe, q)  # rejects indices outside the full universe
        universe, names = universe.restrict(int(i) for i in args["domain"])
        position = {old: new for new, old in enumerate(names)}
        q = [position[i] for i in q if i in position]

    def original(indices) -> list[int]:
        return [names[i] for i in indices]

    closed = hull(universe, q)
    sep = hull_separation(universe, q)
    out: dict[str, Any] = {
        "hull": original(sorted(closed)),
        "classes": [original(sorted(c)) for c in universe.classes()],
        "verdict": sep.verdict,
    }
    if args.get("domain") is not None:
        out["domain"] = list(names)
    if sep.classifier is not None:
        out["classifier"] = original(sorted(sep.classifier))
    if sep.witness is not None:
        out["witness"] = original(sep.witness)
        out["path"] = original(sep.path)
    return _ok(message=f"{sep.verdict}; hull has {len(closed)} of {len(universe.members)} members", **out)


HANDLERS: dict[str, Any] = {
    "relevance.witness": handle_witness,
    "relevance.verify": handle_verify,
    "relevance.classify": handle_classify,
    "relevance.falsify": handle_falsify,
    "relevance.hull": handle_hull,
}
