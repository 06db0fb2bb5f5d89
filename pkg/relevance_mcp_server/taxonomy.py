"""The tractability landscape table and detectors for its decidable mechanisms."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

import networkx as nx

from relevance_mcp_server.decision import DecisionProblem
from relevance_mcp_server.helpers import Check, CheckReport, DomainError
from relevance_mcp_server.pairwise import (
    ActionCoefficients,
    PairwiseSlice,
    interaction_graph,
    product_term,
    symmetry_check,
)

logger = logging.getLogger(__name__)

ROLES = ("core", "lifted", "degenerate")


@dataclass(frozen=True)
class FamilyRecord:
    family: str
    role: str
    mechanism: str


FAMILY_TABLE: tuple[FamilyRecord, ...] = (
    FamilyRecord("bounded actions", "core", "bounded actions"),
    FamilyRecord("separable utility", "core", "separable utility"),
    FamilyRecord("low tensor rank", "core", "low tensor rank"),
    FamilyRecord("tree structure", "core", "tree structure"),
    FamilyRecord("bounded treewidth", "core", "bounded treewidth"),
    FamilyRecord("coordinate symmetry", "core", "coordinate symmetry"),
    FamilyRecord("product distribution", "lifted", "separable utility"),
    FamilyRecord("bounded support", "lifted", "bounded actions"),
    FamilyRecord("bounded horizon", "lifted", "bounded treewidth"),
    FamilyRecord("full observability", "lifted", "tree structure"),
    FamilyRecord("single action", "degenerate", "constant-optimizer collapse"),
    FamilyRecord("strict global dominance", "degenerate", "constant-optimizer collapse"),
    FamilyRecord("constant optimal set", "degenerate", "constant-optimizer collapse"),
    FamilyRecord("multiplicative-separable constant-sign", "degenerate", "constant-optimizer collapse"),
    FamilyRecord("bounded state space", "degenerate", "finite explicit enumeration"),
)

DETECTOR_FAMILIES: dict[str, str] = {
    "single_action": "single action",
    "constant_optimizer": "constant optimal set",
    "strict_global_dominance": "strict global dominance",
    "bounded_actions": "bounded actions",
    "separable": "separable utility",
    "coordinate_symmetric": "coordinate symmetry",
    "parent_tree": "tree structure",
    "bounded_state_space": "bounded state space",
}
MECHANISMS = tuple(DETECTOR_FAMILIES)
SLICE_ONLY = ("separable", "coordinate_symmetric", "parent_tree")
NEEDS_K = ("bounded_actions", "bounded_state_space")


def landscape_table() -> list[FamilyRecord]:
    return list(FAMILY_TABLE)


def primitive_mechanisms() -> list[str]:
    """Distinct mechanisms in table order."""
    return list(dict.fromkeys(r.mechanism for r in FAMILY_TABLE))


def table_integrity() -> CheckReport:
    roles = [r.role for r in FAMILY_TABLE]
    split = [roles.count(role) for role in ROLES]
    families = {r.family for r in FAMILY_TABLE}
    return CheckReport(
        (
            Check("rows", len(FAMILY_TABLE) == 15 and len(families) == 15, {"rows": len(FAMILY_TABLE)}),
            Check("role_split", split == [6, 4, 5], {"split": split}),
            Check("mechanisms", len(primitive_mechanisms()) == 8, {"count": len(primitive_mechanisms())}),
            Check("detectors", set(DETECTOR_FAMILIES.values()) <= families),
        )
    )


table_integrity().raise_for_violation()


# ---------------------------------------------------------------------------
# Tree decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[frozenset[int], ...]
    tree_edges: tuple[tuple[int, int], ...]

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def verify(self, d: int, edges: Iterable[tuple[int, int]]) -> bool:
        """Tree-decomposition axioms for the graph on ``range(d)`` with *edges*, plus width <= 1."""
        if not self.bags:
            return d == 0
        tree = nx.Graph()
        tree.add_nodes_from(range(len(self.bags)))
        tree.add_edges_from(self.tree_edges)
        if not nx.is_tree(tree) or self.width > 1:
            return False
        if set().union(*self.bags) != set(range(d)):
            return False
        if any(not any({i, j} <= b for b in self.bags) for i, j in edges):
            return False
        for v in range(d):
            holding = [k for k, b in enumerate(self.bags) if v in b]
            if not nx.is_connected(tree.subgraph(holding)):
                return False
        return True


@dataclass(frozen=True)
class ParentTreeResult:
    decomposition: TreeDecomposition | None
    parents: tuple[int | None, ...] = ()
    conflict: dict[str, Any] = field(default_factory=dict)


def parent_tree(slc: PairwiseSlice, budget: int | None = None) -> ParentTreeResult:
    """Width-one decomposition when every decision-relevant dependency has at most one parent.

    Edge ``{i, j}`` with ``i < j`` makes ``i`` the parent of ``j``.
    """
    edges = sorted(interaction_graph(slc, "decision", budget).edge_set())
    parents_of: dict[int, list[int]] = {v: [] for v in range(slc.d)}
    for i, j in edges:
        parents_of[j].append(i)
    for v, ps in parents_of.items():
        if len(ps) > 1:
            return ParentTreeResult(None, conflict={"coordinate": v, "parents": ps})
    parent = tuple(ps[0] if ps else None for ps in (parents_of[v] for v in range(slc.d)))
    children: dict[int, list[int]] = {v: [] for v in range(slc.d)}
    for v, p in enumerate(parent):
        if p is not None:
            children[p].append(v)

    bags: list[frozenset[int]] = []
    bag_of: dict[int, int] = {}
    for v in range(slc.d):
        if parent[v] is not None:
            bag_of[v] = len(bags)
            bags.append(frozenset((parent[v], v)))
        elif not children[v]:
            bag_of[v] = len(bags)
            bags.append(frozenset((v,)))
    # a root without its own bag is represented by its first child's bag
    anchor = {v: bag_of[v] if v in bag_of else bag_of[children[v][0]] for v in range(slc.d)}

    tree = nx.Graph()
    tree.add_nodes_from(range(len(bags)))
    for v, p in enumerate(parent):
        if p is not None and anchor[p] != bag_of[v]:
            tree.add_edge(bag_of[v], anchor[p])
    heads = [min(c) for c in sorted(nx.connected_components(tree), key=min)]
    tree.add_edges_from(zip(heads, heads[1:]))
    decomposition = TreeDecomposition(tuple(bags), tuple(sorted(tuple(sorted(e)) for e in tree.edges)))
    return ParentTreeResult(decomposition, parent)


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    mechanism: str
    hit: bool
    decomposition: TreeDecomposition | None = None
    detail: dict[str, Any] = field(default_factory=dict)


def _strictly_dominant(problem: DecisionProblem) -> str | None:
    for k, a in enumerate(problem.actions):
        row = problem.utility[k]
        if all(
            row[p] > other[p] for m, other in enumerate(problem.utility) if m != k for p in range(problem.size)
        ):
            return a
    return None


def detect(
    obj: DecisionProblem | PairwiseSlice, mechanism: str, k: int | None = None, budget: int | None = None
) -> Detection:
    if mechanism not in MECHANISMS:
        raise DomainError(f"Unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
    if mechanism in NEEDS_K and (k is None or k < 1):
        raise DomainError(f"Mechanism {mechanism} needs a bound k >= 1")
    if mechanism in SLICE_ONLY:
        if not isinstance(obj, PairwiseSlice):
            raise DomainError(f"Mechanism {mechanism} needs a pairwise slice, not an abstract problem")
        if mechanism == "separable":
            raw = interaction_graph(obj, "raw", budget)
            return Detection(mechanism, not raw.edges)
        if mechanism == "coordinate_symmetric":
            return Detection(mechanism, symmetry_check(obj, budget))
        result = parent_tree(obj, budget)
        return Detection(mechanism, result.decomposition is not None, result.decomposition, result.conflict)

    problem = obj.to_problem(budget) if isinstance(obj, PairwiseSlice) else obj
    if mechanism == "single_action":
        return Detection(mechanism, len(problem.actions) == 1)
    if mechanism == "bounded_actions":
        return Detection(mechanism, len(problem.actions) <= k, detail={"actions": len(problem.actions)})
    if mechanism == "bounded_state_space":
        return Detection(mechanism, problem.size <= k, detail={"states": problem.size})
    problem.check_budget(budget)
    if mechanism == "constant_optimizer":
        sets = {problem.opt_at(p) for p in range(problem.size)}
        return Detection(mechanism, len(sets) == 1)
    winner = _strictly_dominant(problem)
    return Detection(mechanism, winner is not None, detail={"action": winner} if winner else {})


def detect_all(obj: DecisionProblem | PairwiseSlice, k: int | None = None, budget: int | None = None) -> list[Detection]:
    """Every detector that applies to *obj*; the bounded ones only when *k* is given."""
    out = []
    for mechanism in MECHANISMS:
        if mechanism in SLICE_ONLY and not isinstance(obj, PairwiseSlice):
            continue
        if mechanism in NEEDS_K and k is None:
            continue
        out.append(detect(obj, mechanism, k, budget))
    return out


@dataclass(frozen=True)
class RoleReport:
    roles: tuple[str, ...]
    families: tuple[str, ...]


def classify_role(hits: Iterable[str]) -> RoleReport:
    """Map detector hits through the table; no hit is ``unclassified``, never a claim of intractability."""
    hits = list(hits)
    unknown = [h for h in hits if h not in DETECTOR_FAMILIES]
    if unknown:
        raise DomainError(f"Unknown mechanisms {unknown}")
    families = {DETECTOR_FAMILIES[h] for h in hits}
    rows = [r for r in FAMILY_TABLE if r.family in families]
    roles = tuple(role for role in ROLES if any(r.role == role for r in rows))
    return RoleReport(roles or ("unclassified",), tuple(r.family for r in rows))


# ---------------------------------------------------------------------------
# Only-by witness families
# ---------------------------------------------------------------------------

ONLY_BY_K = 2
ONLY_BY_MECHANISMS = ("separable", "bounded_actions", "coordinate_symmetric", "parent_tree")

# Detectors each family must miss at k = ONLY_BY_K. An empty decision graph is
# trivially a parent tree, so separable utilities always carry that hit too.
ONLY_BY_RIVALS: dict[str, tuple[str, ...]] = {
    "separable": ("bounded_actions", "coordinate_symmetric"),
    "bounded_actions": ("separable", "coordinate_symmetric", "parent_tree"),
    "coordinate_symmetric": ("separable", "bounded_actions", "parent_tree"),
    "parent_tree": ("separable", "bounded_actions", "coordinate_symmetric"),
}
NONDEGENERATE_MISSES = (
    "single_action",
    "constant_optimizer",
    "strict_global_dominance",
    "bounded_state_space",
)


def only_by_witness(mechanism: str, n: int = 3) -> PairwiseSlice:
    """Nondegenerate slice on ``n`` coordinates covered by *mechanism* alone among its rivals."""
    if mechanism not in ONLY_BY_MECHANISMS:
        raise DomainError(f"No only-by family for {mechanism!r}; expected one of {ONLY_BY_MECHANISMS}")
    if n < 3:
        raise DomainError(f"Only-by families need n >= 3, got {n}")
    if mechanism == "separable":
        # one action per coordinate, each rewarding its own bit
        bonus = [ActionCoefficients.build(n, 0, {i: (0, 2)}) for i in range(n)]
        rest = ActionCoefficients.build(n, 1)
        return PairwiseSlice(n, (*(f"on{i}" for i in range(n)), "rest"), (*bonus, rest))
    if mechanism == "bounded_actions":
        pairs = {(i, j): product_term(i + j + 1) for i in range(n) for j in range(i + 1, n)}
        coeffs = (ActionCoefficients.build(n, 0, None, pairs), ActionCoefficients.build(n, "1/2"))
        return PairwiseSlice(n, ("a", "b"), coeffs)
    if mechanism == "coordinate_symmetric":
        pairs = {(i, j): product_term(1) for i in range(n) for j in range(i + 1, n)}
        return PairwiseSlice(
            n,
            ("pairs", "hold", "count"),
            (
                ActionCoefficients.build(n, 0, None, pairs),
                ActionCoefficients.build(n, "1/2"),
                ActionCoefficients.build(n, "-1/4", [(0, 1)] * n),
            ),
        )
    chain = {(i, i + 1): product_term(1) for i in range(n - 1)}
    return PairwiseSlice(
        n,
        ("chain", "hold", "last"),
        (
            ActionCoefficients.build(n, 0, None, chain),
            ActionCoefficients.build(n, "1/2"),
            ActionCoefficients.build(n, 0, {n - 1: (0, "3/4")}),
        ),
    )
