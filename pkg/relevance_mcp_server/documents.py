"""Document codecs and workspace paths.

Documents are JSON or YAML mappings (``yaml.safe_load`` reads both).
Rationals are written as ``"p/q"`` strings, or plain integers; floats are
refused so no value is silently rounded.  Every parse failure raises
:class:`DocumentError` naming the offending field.
"""

from __future__ import annotations

import json
import os
from collections.abc import Callable, Iterable, Mapping, Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from relevance_mcp_server.closure import (
    Affine,
    ClosureStep,
    ClosureTrace,
    DuplicateAction,
    DuplicateState,
    ExtendIrrelevant,
    RelabelActions,
    RelabelCoords,
    StepTransport,
    TableTerm,
    apply_trace,
)
from relevance_mcp_server.decision import CertificationProfile, CoordinateSpace, DecisionProblem, to_fraction
from relevance_mcp_server.helpers import CheckReport, DocumentError
from relevance_mcp_server.obstruction import SCHEME_KIND, FiniteUniverse, UniverseEdge, WitnessBundle
from relevance_mcp_server.pairwise import ActionCoefficients, InteractionGraph, PairwiseSlice
from relevance_mcp_server.patterns import LocalPattern, PatternBounds, PatternEdge, PatternScheme
from relevance_mcp_server.reductions import (
    AdmissibilitySpec,
    DeterministicSpec,
    RelationalSpec,
    SetValuedSpec,
)
from relevance_mcp_server.stability import StabilityCertificate
from relevance_mcp_server.taxonomy import FAMILY_TABLE, primitive_mechanisms

WORKSPACE_DIR_NAME = ".relevance_mcp"
FIXTURES_DIR = Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


def resolve_workspace_root() -> Path:
    """Find the ``.relevance_mcp/`` directory.

    Resolution order:
    1. ``RELEVANCE_MCP_ROOT`` env var (if set)
    2. Walk up from CWD looking for existing ``.relevance_mcp/``
    3. Walk up from CWD looking for ``.git/`` (place ``.relevance_mcp/`` next to it)
    4. Fall back to CWD
    """
    env = os.environ.get("RELEVANCE_MCP_ROOT")
    if env:
        return Path(env)
    cwd = Path.cwd()
    for parent in [cwd, *cwd.parents]:
        if (parent / WORKSPACE_DIR_NAME).is_dir():
            return parent / WORKSPACE_DIR_NAME
    for parent in [cwd, *cwd.parents]:
        if (parent / ".git").is_dir():
            return parent / WORKSPACE_DIR_NAME
    return cwd / WORKSPACE_DIR_NAME


def fixture_path(name: str) -> Path:
    return FIXTURES_DIR / name


# ---------------------------------------------------------------------------
# Loading and dumping
# ---------------------------------------------------------------------------


def load_document(source: Mapping[str, Any] | str | Path) -> dict[str, Any]:
    """Inline mapping, or a path to a JSON/YAML file."""
    if isinstance(source, Mapping):
        return dict(source)
    path = Path(source)
    if not path.is_file():
        raise KeyError(f"No such document: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise DocumentError(f"{path}: not valid JSON/YAML{where}") from exc
    if not isinstance(doc, dict):
        raise DocumentError(f"{path}: top level must be a mapping, got {type(doc).__name__}")
    return doc


def dump_document(doc: Mapping[str, Any]) -> str:
    """Deterministic JSON text."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def format_fraction(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def _need(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(doc, Mapping):
        raise DocumentError(f"{where}: expected a mapping, got {type(doc).__name__}")
    if key not in doc:
        raise DocumentError(f"{where}: missing field {key!r}")
    return doc[key]


def _rational(value: Any, where: str) -> Fraction:
    try:
        return to_fraction(value)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{where}: {exc}") from exc


def _int_list(value: Any, where: str) -> tuple[int, ...]:
    if not isinstance(value, list | tuple) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise DocumentError(f"{where}: expected a list of integers")
    return tuple(value)


def _str_list(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list | tuple) or not all(isinstance(v, str) for v in value):
        raise DocumentError(f"{where}: expected a list of strings")
    return tuple(value)


def _guard(where: str, build: Callable[[], Any]) -> Any:
    """Re-raise construction errors with document context."""
    try:
        return build()
    except DocumentError:
        raise
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{where}: {exc}") from exc


def _fractions(values: Any, where: str) -> tuple[Fraction, ...]:
    if not isinstance(values, list | tuple):
        raise DocumentError(f"{where}: expected a list of rationals")
    return tuple(_rational(v, f"{where}[{k}]") for k, v in enumerate(values))


def _table(rows: Sequence[Any]) -> list[Any]:
    return [[format_fraction(v) for v in r] for r in rows]


# ---------------------------------------------------------------------------
# Problems and slices
# ---------------------------------------------------------------------------


def problem_from_doc(doc: Mapping[str, Any], where: str = "problem") -> DecisionProblem:
    domains = _int_list(_need(doc, "domains", where), f"{where}.domains")
    actions = _str_list(_need(doc, "actions", where), f"{where}.actions")
    utility = _need(doc, "utility", where)
    if not isinstance(utility, Mapping):
        raise DocumentError(f"{where}.utility: expected a mapping of action to values")
    rows = {a: _fractions(utility.get(a), f"{where}.utility.{a}") for a in actions}
    carrier = doc.get("carrier")
    if carrier is not None:
        carrier = [_int_list(s, f"{where}.carrier[{k}]") for k, s in enumerate(carrier)]
    space = _guard(f"{where}.domains", lambda: CoordinateSpace(domains))
    return _guard(where, lambda: DecisionProblem.from_table(space, actions, rows, carrier))


def problem_to_doc(problem: DecisionProblem) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "kind": "problem",
        "domains": list(problem.space.domains),
        "actions": list(problem.actions),
        "utility": {a: [format_fraction(v) for v in row] for a, row in zip(problem.actions, problem.utility, strict=True)},
    }
    if problem.carrier is not None:
        doc["carrier"] = [list(s) for s in problem.carrier]
    return doc


def _pair_key(key: str, where: str) -> tuple[int, int]:
    try:
        i, j = (int(p) for p in str(key).split(","))
    except ValueError:
        raise DocumentError(f"{where}: pair key {key!r} is not 'i,j'") from None
    return i, j


def coefficients_from_doc(doc: Mapping[str, Any], d: int, where: str) -> ActionCoefficients:
    if not isinstance(doc, Mapping):
        raise DocumentError(f"{where}: expected a mapping")
    unary = {}
    for key, values in (doc.get("unary") or {}).items():
        try:
            unary[int(key)] = _fractions(values, f"{where}.unary.{key}")
        except ValueError:
            raise DocumentError(f"{where}.unary: key {key!r} is not a coordinate") from None
    pairs = {
        _pair_key(key, f"{where}.pairs"): [_fractions(r, f"{where}.pairs.{key}") for r in rows]
        for key, rows in (doc.get("pairs") or {}).items()
    }
    constant = _rational(doc.get("c", 0), f"{where}.c")
    return _guard(where, lambda: ActionCoefficients.build(d, constant, unary, pairs))


def coefficients_to_doc(c: ActionCoefficients) -> dict[str, Any]:
    return {
        "c": format_fraction(c.constant),
        "unary": {str(i): [format_fraction(v) for v in t] for i, t in enumerate(c.unary) if any(t)},
        "pairs": {f"{i},{j}": _table(t) for (i, j), t in c.pairs},
    }


def slice_from_doc(doc: Mapping[str, Any], where: str = "slice") -> PairwiseSlice:
    d = _need(doc, "d", where)
    if not isinstance(d, int) or isinstance(d, bool):
        raise DocumentError(f"{where}.d: expected an integer")
    actions = _str_list(_need(doc, "actions", where), f"{where}.actions")
    coeffs = _need(doc, "coeffs", where)
    if not isinstance(coeffs, Mapping):
        raise DocumentError(f"{where}.coeffs: expected a mapping of action to coefficients")
    tables = tuple(coefficients_from_doc(_need(coeffs, a, f"{where}.coeffs"), d, f"{where}.coeffs.{a}") for a in actions)
    extra = sorted(set(coeffs) - set(actions))
    if extra:
        raise DocumentError(f"{where}.coeffs: coefficients for undeclared actions {extra}")
    return _guard(where, lambda: PairwiseSlice(d, actions, tables))


def slice_to_doc(slc: PairwiseSlice) -> dict[str, Any]:
    return {
        "kind": "slice",
        "d": slc.d,
        "actions": list(slc.actions),
        "coeffs": {a: coefficients_to_doc(c) for a, c in zip(slc.actions, slc.coeffs, strict=True)},
    }


def object_from_doc(doc: Mapping[str, Any], where: str = "document") -> DecisionProblem | PairwiseSlice:
    kind = doc.get("kind") if isinstance(doc, Mapping) else None
    if kind == "slice" or (kind is None and isinstance(doc, Mapping) and "coeffs" in doc):
        return slice_from_doc(doc, where)
    if kind in (None, "problem"):
        return problem_from_doc(doc, where)
    raise DocumentError(f"{where}.kind: expected 'problem' or 'slice', got {kind!r}")


def object_to_doc(obj: DecisionProblem | PairwiseSlice) -> dict[str, Any]:
    return slice_to_doc(obj) if isinstance(obj, PairwiseSlice) else problem_to_doc(obj)


# ---------------------------------------------------------------------------
# Steps and traces
# ---------------------------------------------------------------------------


def step_from_doc(doc: Mapping[str, Any], where: str = "step") -> ClosureStep:
    op = _need(doc, "op", where)
    if op == "relabel_actions":
        mapping = _need(doc, "mapping", where)
        pairs = list(mapping.items()) if isinstance(mapping, Mapping) else [tuple(p) for p in mapping]
        return _guard(where, lambda: RelabelActions(tuple((str(a), str(b)) for a, b in pairs)))
    if op == "relabel_coords":
        return RelabelCoords(_int_list(_need(doc, "permutation", where), f"{where}.permutation"))
    if op == "affine":
        alpha_doc = _need(doc, "alpha", where)
        if isinstance(alpha_doc, Mapping) and "table" in alpha_doc:
            alpha: TableTerm | ActionCoefficients = TableTerm(_fractions(alpha_doc["table"], f"{where}.alpha.table"))
        else:
            d = _need(alpha_doc, "d", f"{where}.alpha")
            alpha = coefficients_from_doc(alpha_doc, d, f"{where}.alpha")
        raw = doc.get("beta", 1)
        beta = _fractions(raw, f"{where}.beta") if isinstance(raw, list) else _rational(raw, f"{where}.beta")
        return _guard(where, lambda: Affine(alpha, beta))
    if op == "duplicate_action":
        return DuplicateAction(str(_need(doc, "source", where)), doc.get("new_id"))
    if op == "duplicate_state":
        return DuplicateState(_int_list(_need(doc, "source", where), f"{where}.source"))
    if op == "extend_irrelevant":
        return ExtendIrrelevant()
    raise DocumentError(f"{where}.op: unknown closure step {op!r}")


def step_to_doc(step: ClosureStep) -> dict[str, Any]:
    doc: dict[str, Any] = {"op": step.op}
    if isinstance(step, RelabelActions):
        doc["mapping"] = [list(p) for p in step.mapping]
    elif isinstance(step, RelabelCoords):
        doc["permutation"] = list(step.permutation)
    elif isinstance(step, Affine):
        if isinstance(step.alpha, TableTerm):
            doc["alpha"] = {"table": [format_fraction(v) for v in step.alpha.values]}
        else:
            doc["alpha"] = {"d": step.alpha.dimension, **coefficients_to_doc(step.alpha)}
        beta = step.beta
        doc["beta"] = [format_fraction(b) for b in beta] if isinstance(beta, tuple) else format_fraction(beta)
    elif isinstance(step, DuplicateAction):
        doc["source"] = step.source
        if step.new_id is not None:
            doc["new_id"] = step.new_id
    elif isinstance(step, DuplicateState):
        doc["source"] = list(step.source)
    return doc


def transport_to_doc(t: StepTransport) -> dict[str, Any]:
    return {"coord_map": list(t.coord_map), "new_dimension": t.new_dimension, "action_map": [list(p) for p in t.action_map]}


def transport_from_doc(doc: Mapping[str, Any], where: str) -> StepTransport:
    return StepTransport(
        _int_list(_need(doc, "coord_map", where), f"{where}.coord_map"),
        _need(doc, "new_dimension", where),
        tuple((str(a), str(b)) for a, b in _need(doc, "action_map", where)),
    )


def steps_from_doc(doc: Mapping[str, Any], where: str = "trace") -> list[ClosureStep]:
    steps = _need(doc, "steps", where)
    if not isinstance(steps, list):
        raise DocumentError(f"{where}.steps: expected a list")
    return [step_from_doc(s, f"{where}.steps[{k}]") for k, s in enumerate(steps)]


def trace_from_doc(doc: Mapping[str, Any], base: Any, where: str = "trace") -> ClosureTrace:
    """Recorded trace; without ``transports`` the transports are recomputed from *base*."""
    steps = steps_from_doc(doc, where)
    if "transports" not in doc:
        return apply_trace(base, steps)[1]
    transports = tuple(transport_from_doc(t, f"{where}.transports[{k}]") for k, t in enumerate(doc["transports"]))
    return ClosureTrace(tuple(steps), transports, doc.get("base_dimension", _dim(base)), tuple(doc.get("base_actions", base.actions)))


def _dim(obj: Any) -> int:
    return obj.d if isinstance(obj, PairwiseSlice) else obj.dimension


def trace_to_doc(trace: ClosureTrace) -> dict[str, Any]:
    return {
        "kind": "trace",
        "steps": [step_to_doc(s) for s in trace.steps],
        "transports": [transport_to_doc(t) for t in trace.transports],
        "base_dimension": trace.base_dimension,
        "base_actions": list(trace.base_actions),
    }


# ---------------------------------------------------------------------------
# Patterns and schemes
# ---------------------------------------------------------------------------


def pattern_from_doc(doc: Mapping[str, Any], where: str) -> LocalPattern:
    def vertex(label: Any, w: str) -> Any:
        return None if label is None else tuple(_fractions(t, f"{w}[{k}]") for k, t in enumerate(label))

    def edge(e: Mapping[str, Any], w: str) -> PatternEdge:
        label = e.get("label")
        if label is not None:
            label = tuple(tuple(_fractions(r, f"{w}.label") for r in t) for t in label)
        return PatternEdge(_need(e, "u", w), _need(e, "v", w), label)

    vertices = tuple(vertex(v, f"{where}.vertices[{k}]") for k, v in enumerate(_need(doc, "vertices", where)))
    edges = tuple(edge(e, f"{where}.edges[{k}]") for k, e in enumerate(doc.get("edges", [])))
    return _guard(
        where,
        lambda: LocalPattern(vertices, edges, doc.get("radius", 0), doc.get("actions", 1), doc.get("root", 0)),
    )


def pattern_to_doc(p: LocalPattern) -> dict[str, Any]:
    return {
        "vertices": [None if v is None else _table(v) for v in p.vertices],
        "edges": [
            {"u": e.u, "v": e.v, "label": None if e.label is None else [_table(t) for t in e.label]} for e in p.edges
        ],
        "radius": p.radius,
        "actions": p.actions,
        "root": p.root,
    }


def scheme_from_doc(doc: Mapping[str, Any], where: str = "scheme") -> PatternScheme:
    b = _need(doc, "bounds", where)
    bounds = PatternBounds(
        _need(b, "r_max", f"{where}.bounds"),
        _need(b, "n_max", f"{where}.bounds"),
        _need(b, "a_max", f"{where}.bounds"),
        _rational(_need(b, "c_max", f"{where}.bounds"), f"{where}.bounds.c_max"),
    )
    witness = tuple(pattern_from_doc(p, f"{where}.witness[{k}]") for k, p in enumerate(doc.get("witness", [])))
    forbidden = tuple(pattern_from_doc(p, f"{where}.forbidden[{k}]") for k, p in enumerate(doc.get("forbidden", [])))
    return _guard(where, lambda: PatternScheme(witness, forbidden, bounds))


def scheme_to_doc(s: PatternScheme) -> dict[str, Any]:
    return {
        "kind": "scheme",
        "bounds": {
            "r_max": s.bounds.r_max,
            "n_max": s.bounds.n_max,
            "a_max": s.bounds.a_max,
            "c_max": format_fraction(s.bounds.c_max),
        },
        "witness": [pattern_to_doc(p) for p in s.witness],
        "forbidden": [pattern_to_doc(p) for p in s.forbidden],
    }


# ---------------------------------------------------------------------------
# Bundles and universes
# ---------------------------------------------------------------------------


def bundle_to_doc(bundle: WitnessBundle) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "kind": "bundle",
        "target": bundle.kind,
        "base": slice_to_doc(bundle.base),
        "trace": trace_to_doc(bundle.trace),
        "translated": slice_to_doc(bundle.translated),
    }
    if bundle.scheme is not None:
        doc["scheme"] = scheme_to_doc(bundle.scheme)
    if bundle.report is not None:
        doc["report"] = bundle.report.to_dict()
    return doc


def bundle_from_doc(doc: Mapping[str, Any], where: str = "bundle") -> WitnessBundle:
    base = slice_from_doc(_need(doc, "base", where), f"{where}.base")
    translated = slice_from_doc(_need(doc, "translated", where), f"{where}.translated")
    trace = trace_from_doc(_need(doc, "trace", where), base, f"{where}.trace")
    target = _need(doc, "target", where)
    scheme = scheme_from_doc(doc["scheme"], f"{where}.scheme") if "scheme" in doc else None
    if target == SCHEME_KIND and scheme is None:
        raise DocumentError(f"{where}: a scheme bundle must carry its scheme")
    return WitnessBundle(target, base, trace, translated, scheme)


def universe_from_doc(doc: Mapping[str, Any], where: str = "universe") -> FiniteUniverse:
    members = [slice_from_doc(m, f"{where}.members[{k}]") for k, m in enumerate(_need(doc, "members", where))]
    if "edges" in doc:
        edges = []
        for k, e in enumerate(doc["edges"]):
            w = f"{where}.edges[{k}]"
            step = step_from_doc(_need(e, "step", w), f"{w}.step")
            edges.append(UniverseEdge(_need(e, "source", w), _need(e, "target", w), step))
        return _guard(where, lambda: FiniteUniverse.from_edges(members, edges))
    generators = [step_from_doc(s, f"{where}.generators[{k}]") for k, s in enumerate(_need(doc, "generators", where))]
    return FiniteUniverse.build(members, generators)


def universe_to_doc(u: FiniteUniverse) -> dict[str, Any]:
    return {
        "kind": "universe",
        "members": [slice_to_doc(m) for m in u.members],
        "edges": [{"source": e.source, "target": e.target, "step": step_to_doc(e.step)} for e in u.edges],
    }


# ---------------------------------------------------------------------------
# Specifications
# ---------------------------------------------------------------------------


def spec_from_doc(
    doc: Mapping[str, Any], where: str = "spec"
) -> tuple[AdmissibilitySpec, CoordinateSpace, tuple[tuple[int, ...], ...] | None]:
    """Specification, its space and optional carrier."""
    space = _guard(f"{where}.space", lambda: CoordinateSpace(_int_list(_need(doc, "space", where), f"{where}.space")))
    carrier = doc.get("carrier")
    if carrier is not None:
        carrier = tuple(_int_list(s, f"{where}.carrier[{k}]") for k, s in enumerate(carrier))
    outputs = _str_list(_need(doc, "outputs", where), f"{where}.outputs")
    variant = _need(doc, "variant", where)
    gap = {
        "allowed": _rational(doc.get("allowed", 1), f"{where}.allowed"),
        "blocked": _rational(doc.get("blocked", 0), f"{where}.blocked"),
    }
    spec: AdmissibilitySpec
    if variant == "deterministic":
        spec = DeterministicSpec(outputs, _str_list(_need(doc, "values", where), f"{where}.values"))
    elif variant == "set_valued":
        sets = tuple(frozenset(_str_list(s, f"{where}.sets[{k}]")) for k, s in enumerate(_need(doc, "sets", where)))
        spec = SetValuedSpec(outputs=outputs, sets=sets, **gap)
    elif variant == "relational":
        pairs = tuple(
            (_int_list(s, f"{where}.pairs[{k}]"), str(out)) for k, (s, out) in enumerate(_need(doc, "pairs", where))
        )
        spec = RelationalSpec(outputs=outputs, pairs=pairs, **gap)
    else:
        raise DocumentError(f"{where}.variant: expected deterministic, set_valued or relational, got {variant!r}")
    return spec, space, carrier


def spec_to_doc(
    spec: AdmissibilitySpec, space: CoordinateSpace, carrier: Sequence[Sequence[int]] | None = None
) -> dict[str, Any]:
    doc: dict[str, Any] = {"kind": "spec", "variant": spec.variant, "space": list(space.domains), "outputs": list(spec.outputs)}
    if carrier is not None:
        doc["carrier"] = [list(s) for s in carrier]
    if isinstance(spec, DeterministicSpec):
        doc["values"] = list(spec.values)
        return doc
    doc["allowed"], doc["blocked"] = format_fraction(spec.allowed), format_fraction(spec.blocked)
    if isinstance(spec, SetValuedSpec):
        doc["sets"] = [sorted(s) for s in spec.sets]
    else:
        doc["pairs"] = [[list(s), out] for s, out in spec.pairs]
    return doc


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def profile_to_doc(p: CertificationProfile) -> dict[str, Any]:
    return {
        "relevant": sorted(p.relevant),
        "minimal_sufficient": None if p.minimal_sufficient is None else sorted(p.minimal_sufficient),
        "srank": p.srank,
        "m": p.quotient_count,
        "capacity": p.capacity,
        "within_capacity": p.within_capacity,
        "relevant_set_sufficient": p.sufficient_family_generator is not None,
    }


def certificate_to_doc(c: StabilityCertificate) -> dict[str, Any]:
    return {
        "verdict": c.verdict,
        "delta": format_fraction(c.delta),
        "min_gap": None if c.min_gap is None else format_fraction(c.min_gap),
        "checked_profiles": c.checked_profiles,
    }


def graph_to_doc(g: InteractionGraph) -> dict[str, Any]:
    return {
        "mode": g.mode,
        "d": g.d,
        "edges": [
            {"i": e.i, "j": e.j, "action": e.action, "other": e.other, "value": format_fraction(e.value)} for e in g.edges
        ],
    }


def report_to_doc(report: CheckReport) -> dict[str, Any]:
    return report.to_dict()


def taxonomy_to_doc() -> dict[str, Any]:
    return {
        "families": [{"family": r.family, "role": r.role, "mechanism": r.mechanism} for r in FAMILY_TABLE],
        "mechanisms": primitive_mechanisms(),
    }


# ---------------------------------------------------------------------------
# Tool arguments
# ---------------------------------------------------------------------------


def document_arg(args: Mapping[str, Any], key: str) -> dict[str, Any]:
    """Inline document or path named by *key*; a missing argument is a parameter error."""
    if args.get(key) is None:
        raise ValueError(f"Missing required argument {key!r}")
    source = args[key]
    if not isinstance(source, Mapping | str):
        raise TypeError(f"Argument {key!r} must be a document or a file path")
    return load_document(source)


def state_list(states: Iterable[Sequence[int]]) -> list[list[int]]:
    return [list(s) for s in states]
