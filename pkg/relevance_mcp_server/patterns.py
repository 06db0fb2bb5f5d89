"""Bounded-pattern slice predicates over the pairwise syntax graph.

The syntax graph of a slice has one vertex per coordinate, labelled with the
tuple of unary tables across actions, and an edge ``{i, j}`` whenever some
action stores a nonzero pair table there, labelled with the tuple of pair
tables oriented ``i < j``.

A pattern occurs at a rooted neighbourhood when there is an injective,
root-preserving map of pattern vertices into the neighbourhood, every image
within the pattern's declared radius of the root, such that labels agree
under one bijection between pattern action slots and slice actions.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from relevance_mcp_server.helpers import DomainError
from relevance_mcp_server.pairwise import ZERO_PAIR, PairTable, PairwiseSlice, UnaryTable, transpose

VertexLabel = tuple[UnaryTable, ...]
EdgeLabel = tuple[PairTable, ...]


# ---------------------------------------------------------------------------
# Syntax graph
# ---------------------------------------------------------------------------


def syntax_graph(slc: PairwiseSlice) -> nx.Graph:
    g = nx.Graph(actions=len(slc.actions))
    for i in range(slc.d):
        g.add_node(i, label=tuple(c.unary[i] for c in slc.coeffs))
    for i, j in itertools.combinations(range(slc.d), 2):
        tables = tuple(c.pair(i, j) for c in slc.coeffs)
        if any(t != ZERO_PAIR for t in tables):
            g.add_edge(i, j, label=tables)
    return g


def rooted_neighborhood(graph: nx.Graph, v: int, r: int) -> nx.Graph:
    if v not in graph:
        raise DomainError(f"Vertex {v} is not in the graph")
    if r < 0:
        raise DomainError(f"Radius must be >= 0, got {r}")
    hood = nx.ego_graph(graph, v, radius=r)
    hood.graph = {**graph.graph, "root": v}
    return hood


# ---------------------------------------------------------------------------
# Patterns and schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternEdge:
    """Edge ``u -- v``; the label's tables are indexed ``[x_u][x_v]``."""

    u: int
    v: int
    label: EdgeLabel | None = None


@dataclass(frozen=True)
class LocalPattern:
    vertices: tuple[VertexLabel | None, ...]
    edges: tuple[PatternEdge, ...] = ()
    radius: int = 0
    actions: int = 1
    root: int = 0

    def __post_init__(self) -> None:
        n = len(self.vertices)
        if not 0 <= self.root < n:
            raise DomainError(f"Pattern root {self.root} is not one of its {n} vertices")
        if self.radius < 0 or self.actions < 1:
            raise DomainError("Pattern radius must be >= 0 and action count >= 1")
        for label in self.vertices:
            if label is not None and len(label) != self.actions:
                raise DomainError(f"Vertex label has {len(label)} action slots, pattern declares {self.actions}")
        seen = set()
        for e in self.edges:
            if e.u == e.v or not (0 <= e.u < n and 0 <= e.v < n):
                raise DomainError(f"Pattern edge {e.u}--{e.v} is not between two distinct vertices")
            key = frozenset((e.u, e.v))
            if key in seen:
                raise DomainError(f"Pattern edge {e.u}--{e.v} is listed twice")
            seen.add(key)
            if e.label is not None and len(e.label) != self.actions:
                raise DomainError(f"Edge label has {len(e.label)} action slots, pattern declares {self.actions}")

    def coefficient_bound(self) -> Fraction:
        values = [abs(v) for label in self.vertices if label for t in label for v in t]
        values += [abs(v) for e in self.edges if e.label for t in e.label for row in t for v in row]
        return max(values, default=Fraction(0))


@dataclass(frozen=True)
class PatternBounds:
    r_max: int
    n_max: int
    a_max: int
    c_max: Fraction

    def violations(self, pattern: LocalPattern) -> list[str]:
        out = []
        if pattern.radius > self.r_max:
            out.append(f"radius {pattern.radius} > r_max {self.r_max}")
        if len(pattern.vertices) > self.n_max:
            out.append(f"{len(pattern.vertices)} vertices > n_max {self.n_max}")
        if pattern.actions > self.a_max:
            out.append(f"{pattern.actions} actions > a_max {self.a_max}")
        if pattern.coefficient_bound() > self.c_max:
            out.append(f"coefficient {pattern.coefficient_bound()} > c_max {self.c_max}")
        return out


@dataclass(frozen=True)
class PatternScheme:
    witness: tuple[LocalPattern, ...]
    forbidden: tuple[LocalPattern, ...]
    bounds: PatternBounds

    def __post_init__(self) -> None:
        if not self.witness and not self.forbidden:
            raise DomainError("A scheme needs at least one witness or forbidden pattern")
        for family, patterns in (("witness", self.witness), ("forbidden", self.forbidden)):
            for k, p in enumerate(patterns):
                bad = self.bounds.violations(p)
                if bad:
                    raise DomainError(f"{family} pattern {k} exceeds the scheme bounds: {', '.join(bad)}")


IMPOSSIBLE_PATTERN = LocalPattern(vertices=(None, None), radius=0, actions=1)


def constant_scheme(value: bool) -> PatternScheme:
    """Constant predicate from a two-vertex radius-0 pattern that can never occur."""
    bounds = PatternBounds(r_max=0, n_max=2, a_max=1, c_max=Fraction(0))
    if value:
        return PatternScheme((), (IMPOSSIBLE_PATTERN,), bounds)
    return PatternScheme((IMPOSSIBLE_PATTERN,), (), bounds)


# ---------------------------------------------------------------------------
# Occurrence
# ---------------------------------------------------------------------------


def occurs(pattern: LocalPattern, neighborhood: nx.Graph) -> bool:
    root = neighborhood.graph["root"]
    if pattern.actions != neighborhood.graph["actions"]:
        return False
    reach = nx.single_source_shortest_path_length(neighborhood, root, cutoff=pattern.radius)
    order = [pattern.root, *(v for v in range(len(pattern.vertices)) if v != pattern.root)]
    return any(
        _embed(pattern, neighborhood, sigma, order, reach, {})
        for sigma in itertools.permutations(range(pattern.actions))
    )


def _vertex_ok(pattern: LocalPattern, hood: nx.Graph, sigma: Sequence[int], pv: int, gv: int) -> bool:
    label = pattern.vertices[pv]
    if label is None:
        return True
    actual = hood.nodes[gv]["label"]
    return all(label[p] == actual[sigma[p]] for p in range(pattern.actions))


def _edge_ok(pattern: LocalPattern, hood: nx.Graph, sigma: Sequence[int], e: PatternEdge, gu: int, gv: int) -> bool:
    if not hood.has_edge(gu, gv):
        return False
    if e.label is None:
        return True
    actual = hood.edges[gu, gv]["label"]
    for p in range(pattern.actions):
        table = actual[sigma[p]]
        if gu > gv:
            table = transpose(table)
        if e.label[p] != table:
            return False
    return True


def _embed(
    pattern: LocalPattern,
    hood: nx.Graph,
    sigma: Sequence[int],
    order: list[int],
    reach: dict[int, int],
    assigned: dict[int, int],
) -> bool:
    if len(assigned) == len(order):
        return True
    pv = order[len(assigned)]
    choices: Iterable[int] = [hood.graph["root"]] if pv == pattern.root else sorted(reach)
    used = set(assigned.values())
    for gv in choices:
        if gv in used or gv not in reach or not _vertex_ok(pattern, hood, sigma, pv, gv):
            continue
        assigned[pv] = gv
        if all(
            _edge_ok(pattern, hood, sigma, e, assigned[e.u], assigned[e.v])
            for e in pattern.edges
            if e.u in assigned and e.v in assigned and pv in (e.u, e.v)
        ) and _embed(pattern, hood, sigma, order, reach, assigned):
            return True
        del assigned[pv]
    return False


# ---------------------------------------------------------------------------
# Scheme evaluation
# ---------------------------------------------------------------------------


def evaluate_scheme(scheme: PatternScheme, slc: PairwiseSlice) -> bool:
    g = syntax_graph(slc)
    hoods = [rooted_neighborhood(g, v, scheme.bounds.r_max) for v in g]
    witnessed = bool(scheme.witness) and any(occurs(p, h) for h in hoods for p in scheme.witness)
    clean = bool(scheme.forbidden) and not any(occurs(p, h) for h in hoods for p in scheme.forbidden)
    return witnessed or clean


@dataclass(frozen=True)
class StabilizationReport:
    holds: bool
    constant: bool | None
    verdicts: tuple[bool, ...]


def action_stabilization_check(scheme: PatternScheme, sample: Sequence[PairwiseSlice]) -> StabilizationReport:
    """Above the action bound no pattern embeds, so every verdict is the forbidden-branch default."""
    small = [k for k, s in enumerate(sample) if len(s.actions) <= scheme.bounds.a_max]
    if small:
        raise DomainError(f"Sample slices {small} do not exceed the action bound {scheme.bounds.a_max}")
    verdicts = tuple(evaluate_scheme(scheme, s) for s in sample)
    default = bool(scheme.forbidden)
    constant = verdicts[0] if verdicts and len(set(verdicts)) == 1 else None
    return StabilizationReport(all(v == default for v in verdicts), constant, verdicts)
