"""Certification tool definitions and handlers — analyze, graph, transform, reduce, stability, taxonomy."""

from __future__ import annotations

import logging
from typing import Any

from mcp.types import Tool

from relevance_mcp_server.closure import apply_trace, verify_invariance
from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    certification_profile,
    distinct_symbol_count,
    quotient,
    relevance_witness,
    sufficiency_witness,
    summary_refines_quotient,
)
from relevance_mcp_server.documents import (
    certificate_to_doc,
    document_arg,
    format_fraction,
    graph_to_doc,
    object_from_doc,
    object_to_doc,
    problem_to_doc,
    profile_to_doc,
    slice_from_doc,
    spec_from_doc,
    state_list,
    steps_from_doc,
    taxonomy_to_doc,
    trace_from_doc,
    trace_to_doc,
)
from relevance_mcp_server.helpers import _ok
from relevance_mcp_server.pairwise import GRAPH_MODES, PairwiseSlice, dichotomy_report, interaction_graph
from relevance_mcp_server.realize import Labeling, realize_equivalence, realize_labeling
from relevance_mcp_server.reductions import (
    PRESENTATION_MODES,
    compress_profiles,
    induce_problem,
    present_as_bits,
    render_output,
    transfer_check,
)
from relevance_mcp_server.stability import (
    FLIP_KINDS,
    NonSufficiencyWitness,
    RelevanceWitness,
    global_stability_certificate,
    make_flip_pair,
    profile_difference,
    uniform_distance,
    verify_flip,
    witness_preservation,
)
from relevance_mcp_server.state import RunState
from relevance_mcp_server.taxonomy import MECHANISMS, classify_role, detect, detect_all

logger = logging.getLogger(__name__)

_DOC = {
    "type": ["object", "string"],
    "description": "Inline document, or a path to a JSON/YAML document file.",
}
_RUN = {
    "budget": {"type": "integer", "description": "Max states to enumerate (default RELEVANCE_MCP_MAX_STATES)."},
    "subset_cap": {"type": "integer", "description": "Max dimension for full subset scans."},
    "self_check": {"type": "boolean", "description": "Run brute-force self-checks."},
}

REDUCE_OPERATIONS = ("induce", "transfer", "compress", "present", "realize")

# ---------------------------------------------------------------------------
# Tool definitions
# ---------------------------------------------------------------------------

TOOLS: list[Tool] = [
    Tool(
        name="relevance.analyze",
        description=(
            "Certify a decision problem or pairwise slice: quotient classes, relevant coordinates, "
            "minimal sufficient set, srank, quotient size m and the capacity check. Optionally test "
            "one coordinate set for sufficiency or check that a summary refines the quotient."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "document": _DOC,
                "coords": {"type": "array", "items": {"type": "integer"}, "description": "Coordinate set to test."},
                "summary": {"type": "array", "description": "One summary symbol per state."},
                **_RUN,
            },
            "required": ["document"],
        },
    ),
    Tool(
        name="relevance.graph",
        description="Interaction graph of a pairwise slice (raw, decision or supported mode), with DOT export.",
        inputSchema={
            "type": "object",
            "properties": {
                "document": _DOC,
                "mode": {"type": "string", "enum": list(GRAPH_MODES), "default": "raw"},
                "dichotomy": {"type": "boolean", "description": "Also report the symmetric-slice dichotomy."},
                **_RUN,
            },
            "required": ["document"],
        },
    ),
    Tool(
        name="relevance.transform",
        description=(
            "Apply a closure trace to a problem or slice and verify by brute force that certification "
            "is preserved under the transport."
        ),
        inputSchema={
            "type": "object",
            "properties": {"document": _DOC, "trace": _DOC, "seed": {"type": "integer"}, **_RUN},
            "required": ["document", "trace"],
        },
    ),
    Tool(
        name="relevance.reduce",
        description=(
            "Semantic reductions: induce a problem from an admissibility spec, check the transfer, "
            "compress duplicate action profiles, present a problem on a Boolean cube, or realize a labeling."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "operation": {"type": "string", "enum": list(REDUCE_OPERATIONS)},
                "document": _DOC,
                "spec": _DOC,
                "mode": {"type": "string", "enum": list(PRESENTATION_MODES), "default": "binary"},
                "domains": {"type": "array", "items": {"type": "integer"}},
                "labels": {"type": "array", "items": {"type": "string"}},
                "blocks": {"type": "array", "description": "Partition of the states into blocks."},
                **_RUN,
            },
            "required": ["operation"],
        },
    ),
    Tool(
        name="relevance.stability",
        description=(
            "Compare a problem with a perturbation: uniform distance, global stability certificate or "
            "refusal, and witness preservation. With operation=flip, build an epsilon-close flip pair."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "operation": {"type": "string", "enum": ["certify", "flip"], "default": "certify"},
                "document": _DOC,
                "other": _DOC,
                "witness": {"type": ["object", "string"], "description": "{type: relevance|nonsufficiency, ...} inline or as a file path."},
                "epsilon": {"type": ["string", "integer"]},
                "kind": {"type": "string", "enum": list(FLIP_KINDS), "default": "relevance"},
                **_RUN,
            },
            "required": [],
        },
    ),
    Tool(
        name="relevance.taxonomy",
        description=(
            "Return the landscape table. With a document, run the mechanism detectors and map the hits "
            "to roles."
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "document": _DOC,
                "mechanism": {"type": "string", "enum": list(MECHANISMS)},
                "k": {"type": "integer", "description": "Bound for bounded_actions / bounded_state_space."},
                **_RUN,
            },
            "required": [],
        },
    ),
]

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _problem(obj: DecisionProblem | PairwiseSlice, budget: int) -> DecisionProblem:
    if isinstance(obj, PairwiseSlice):
        return obj.to_problem(budget)
    obj.check_budget(budget)
    return obj


def _tier(obj: DecisionProblem | PairwiseSlice) -> str:
    if isinstance(obj, PairwiseSlice):
        return "slice"
    return "product" if obj.is_product else "abstract"


def _set(coords: Any) -> str:
    return "{" + ",".join(str(i) for i in sorted(coords)) + "}"


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


async def handle_analyze(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    obj = object_from_doc(document_arg(args, "document"))
    problem = _problem(obj, cfg.budget)
    q = quotient(problem, cfg.budget)
    profile = certification_profile(
        problem, budget=cfg.budget, subset_cap=cfg.subset_cap, check=cfg.self_check
    )
    out: dict[str, Any] = {
        "tier": _tier(obj),
        "classes": [
            {"optimal": sorted(q.classes[k]), "states": state_list(problem.states[p] for p in block)}
            for k, block in enumerate(q.blocks())
        ],
        **profile_to_doc(profile),
        "relevance_witnesses": {
            str(i): state_list(relevance_witness(problem, i, cfg.budget) or ()) for i in sorted(profile.relevant)
        },
    }
    if args.get("coords") is not None:
        coords = [int(i) for i in args["coords"]]
        witness = sufficiency_witness(problem, coords, cfg.budget)
        out["query"] = {
            "coords": sorted(set(coords)),
            "sufficient": witness is None,
            "witness": None if witness is None else state_list(witness),
        }
    if args.get("summary") is not None:
        summary = [str(s) for s in args["summary"]]
        out["summary"] = {
            "refines_quotient": summary_refines_quotient(problem, summary),
            "distinct_symbols": distinct_symbol_count(summary),
        }

    if not profile.relevant and profile.minimal_sufficient == frozenset():
        message = "empty set sufficient; all coordinates irrelevant"
    else:
        minimal = "none" if profile.minimal_sufficient is None else _set(profile.minimal_sufficient)
        verdict = "holds" if profile.within_capacity else "FAILS"
        message = (
            f"{profile.quotient_count} quotient classes; relevant={_set(profile.relevant)}; "
            f"minimal sufficient={minimal}; srank={profile.srank}; "
            f"m <= capacity {profile.capacity} {verdict}"
        )
    return _ok(message=message, **out)


async def handle_graph(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    slc = slice_from_doc(document_arg(args, "document"))
    mode = args.get("mode") or "raw"
    g = interaction_graph(slc, mode, cfg.budget)
    dot = g.to_dot()
    out: dict[str, Any] = {**graph_to_doc(g), "verified": g.verify(slc), "dot": dot}
    if args.get("dichotomy"):
        report = dichotomy_report(slc, cfg.budget)
        out["dichotomy"] = {
            "verdict": report.verdict,
            "edge_count": report.edge_count,
            "counterexample": None
            if report.counterexample is None
            else {
                "action": report.counterexample[0],
                "state": list(report.counterexample[1]),
                "swap": [report.counterexample[2], report.counterexample[2] + 1],
            },
        }
    edges = ", ".join(f"{e.i}--{e.j}" for e in g.edges) or "no edges"
    return _ok(message=f"{mode} graph on {slc.d} coordinates: {edges}", artifact=dot, **out)


async def handle_transform(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    obj = object_from_doc(document_arg(args, "document"))
    trace_doc = document_arg(args, "trace")
    if "transports" in trace_doc:
        trace = trace_from_doc(trace_doc, obj)
        result, _ = apply_trace(obj, list(trace.steps))
    else:
        result, trace = apply_trace(obj, steps_from_doc(trace_doc))
    report = verify_invariance(
        obj, trace, result, subset_cap=cfg.subset_cap, budget=cfg.budget, seed=cfg.seed
    )
    report.raise_for_violation()
    doc = object_to_doc(result)
    ops = " -> ".join(s.op for s in trace.steps) or "empty trace"
    return _ok(
        message=f"applied {ops}; {len(report.checks)} invariance checks passed",
        result=doc,
        trace=trace_to_doc(trace),
        report=report.to_dict(),
        artifact=doc,
    )


async def handle_reduce(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    operation = args.get("operation")
    if operation not in REDUCE_OPERATIONS:
        raise ValueError(f"operation must be one of {REDUCE_OPERATIONS}, got {operation!r}")

    if operation in ("induce", "transfer"):
        spec, space, carrier = spec_from_doc(document_arg(args, "spec"))
        if operation == "transfer":
            report = transfer_check(spec, space, carrier=carrier, budget=cfg.budget, subset_cap=cfg.subset_cap)
            report.raise_for_violation()
            return _ok(message=f"{spec.variant} spec transfers exactly", report=report.to_dict())
        problem = induce_problem(spec, space, carrier=carrier, budget=cfg.budget)
        doc = problem_to_doc(problem)
        return _ok(
            message=f"induced {len(problem.actions)} actions over {problem.size} states",
            problem=doc,
            actions=[render_output(a) for a in problem.actions],
            artifact=doc,
        )

    if operation == "realize":
        domains = args.get("domains")
        if domains is None:
            raise ValueError("realize needs 'domains'")
        space = CoordinateSpace(tuple(int(k) for k in domains))
        if args.get("labels") is not None:
            problem = realize_labeling(space, Labeling(tuple(args["labels"])), cfg.budget)
        elif args.get("blocks") is not None:
            problem = realize_equivalence(space, args["blocks"], cfg.budget)
        else:
            raise ValueError("realize needs 'labels' or 'blocks'")
        doc = problem_to_doc(problem)
        return _ok(message=f"realized {len(problem.actions)} classes", problem=doc, artifact=doc)

    obj = object_from_doc(document_arg(args, "document"))
    if operation == "compress":
        compressed = compress_profiles(obj, budget=cfg.budget, subset_cap=cfg.subset_cap, check=cfg.self_check)
        doc = object_to_doc(compressed.result)
        return _ok(
            message=f"{len(obj.actions)} actions compress to {compressed.distinct} distinct profiles",
            result=doc,
            profiles={k: list(v) for k, v in compressed.profiles.items()},
            artifact=doc,
        )

    mode = args.get("mode") or "binary"
    presentation = present_as_bits(_problem(obj, cfg.budget), mode, cfg.budget)
    doc = problem_to_doc(presentation.problem)
    relevant = [i for i in range(presentation.width) if presentation.relevant(i)]
    return _ok(
        message=f"{mode} presentation uses {presentation.width} coordinates; relevant={_set(relevant)}",
        problem=doc,
        codes=state_list(presentation.codes),
        relevant=relevant,
        artifact=doc,
    )


def _witness(raw: dict[str, Any]) -> RelevanceWitness | NonSufficiencyWitness:
    kind = raw.get("type")
    s, t = tuple(raw.get("s", ())), tuple(raw.get("t", ()))
    if kind == "relevance":
        return RelevanceWitness(int(raw["coordinate"]), s, t)
    if kind == "nonsufficiency":
        return NonSufficiencyWitness(tuple(int(i) for i in raw.get("coords", ())), s, t)
    raise ValueError(f"witness.type must be 'relevance' or 'nonsufficiency', got {kind!r}")


async def handle_stability(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    if (args.get("operation") or "certify") == "flip":
        if args.get("epsilon") is None:
            raise ValueError("flip needs 'epsilon'")
        pair = make_flip_pair(str(args["epsilon"]), args.get("kind") or "relevance")
        return _ok(
            message=f"{pair.kind} flips at distance {format_fraction(uniform_distance(pair.tracking, pair.tied))}",
            tracking=problem_to_doc(pair.tracking),
            tied=problem_to_doc(pair.tied),
            epsilon=format_fraction(pair.epsilon),
            verified=verify_flip(pair),
            artifact={"tracking": problem_to_doc(pair.tracking), "tied": problem_to_doc(pair.tied)},
        )

    base = _problem(object_from_doc(document_arg(args, "document")), cfg.budget)
    other = _problem(object_from_doc(document_arg(args, "other"), "other"), cfg.budget)
    cert = global_stability_certificate(base, other, check=cfg.self_check, budget=cfg.budget)
    out: dict[str, Any] = {"certificate": certificate_to_doc(cert)}
    if not cert.certified:
        out["profile_difference"] = profile_difference(base, other)
    if args.get("witness") is not None:
        out["witness_preserved"] = witness_preservation(
            base, other, _witness(document_arg(args, "witness")), check=cfg.self_check
        )
    doc = out["certificate"]
    if cert.certified:
        message = f"certified: min gap {doc['min_gap']} exceeds 2 x delta {doc['delta']}"
    else:
        message = f"refused: min gap {doc['min_gap']} does not exceed 2 x delta {doc['delta']}"
    return _ok(message=message, artifact=doc, **out)


async def handle_taxonomy(state: RunState, args: dict[str, Any]) -> dict[str, Any]:
    cfg = state.for_call(args)
    table = taxonomy_to_doc()
    if args.get("document") is None:
        return _ok(message=f"{len(table['families'])} families, {len(table['mechanisms'])} mechanisms", **table)
    obj = object_from_doc(document_arg(args, "document"))
    k = None if args.get("k") is None else int(args["k"])
    if args.get("mechanism"):
        detections = [detect(obj, args["mechanism"], k, cfg.budget)]
    else:
        detections = detect_all(obj, k, cfg.budget)
    hits = [d.mechanism for d in detections if d.hit]
    roles = classify_role(hits)
    found = []
    for d in detections:
        entry: dict[str, Any] = {"mechanism": d.mechanism, "hit": d.hit}
        if d.detail:
            entry["detail"] = d.detail
        if d.decomposition is not None:
            entry["decomposition"] = {
                "bags": [sorted(b) for b in d.decomposition.bags],
                "tree_edges": [list(e) for e in d.decomposition.tree_edges],
                "width": d.decomposition.width,
            }
        found.append(entry)
    return _ok(
        message=f"hits: {', '.join(hits) or 'none'}; roles: {', '.join(roles.roles)}",
        detections=found,
        roles=list(roles.roles),
        families=list(roles.families),
        table=table,
    )


HANDLERS: dict[str, Any] = {
    "relevance.analyze": handle_analyze,
    "relevance.graph": handle_graph,
    "relevance.transform": handle_transform,
    "relevance.reduce": handle_reduce,
    "relevance.stability": handle_stability,
    "relevance.taxonomy": handle_taxonomy,
}
