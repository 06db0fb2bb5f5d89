"""Binary pairwise slices, mixed differences, interaction graphs and target predicates.

A slice stores, per action, a constant, one two-point unary table per
coordinate and a 2x2 table per coordinate pair ``i < j``:

    U(a, x) = c_a + sum_i u_{a,i}(x_i) + sum_{i<j} w_{a,ij}(x_i, x_j)

Mixed differences are always taken on the expanded utility with every
off-pair coordinate held at 0.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any

import networkx as nx

from relevance_mcp_server.decision import CoordinateSpace, DecisionProblem, State, to_fraction
from relevance_mcp_server.helpers import DomainError, TheoryViolation

logger = logging.getLogger(__name__)

UnaryTable = tuple[Fraction, Fraction]
PairTable = tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]

_ZERO = Fraction(0)
ZERO_UNARY: UnaryTable = (_ZERO, _ZERO)
ZERO_PAIR: PairTable = ((_ZERO, _ZERO), (_ZERO, _ZERO))

TARGET_KINDS = ("dominant_pair", "margin_bounded", "ghost_action", "offset_signature")
GRAPH_MODES = ("raw", "decision", "supported")


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def unary_table(values: Sequence[Any]) -> UnaryTable:
    if len(values) != 2:
        raise DomainError(f"A unary table has two values, got {list(values)}")
    return (to_fraction(values[0]), to_fraction(values[1]))


def pair_table(rows: Sequence[Sequence[Any]]) -> PairTable:
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise DomainError(f"A pair table is 2x2, got {rows!r}")
    return (unary_table(rows[0]), unary_table(rows[1]))


def product_term(scale: Any) -> PairTable:
    """Table of ``scale * x_i * x_j``."""
    return ((_ZERO, _ZERO), (_ZERO, to_fraction(scale)))


def transpose(table: PairTable) -> PairTable:
    return ((table[0][0], table[1][0]), (table[0][1], table[1][1]))


def _add_pair(p: PairTable, q: PairTable) -> PairTable:
    return ((p[0][0] + q[0][0], p[0][1] + q[0][1]), (p[1][0] + q[1][0], p[1][1] + q[1][1]))


def _scale_pair(p: PairTable, beta: Fraction) -> PairTable:
    return ((beta * p[0][0], beta * p[0][1]), (beta * p[1][0], beta * p[1][1]))


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionCoefficients:
    """Constant, unary and pair tables for one action (or one action-independent term).

    ``pairs`` holds only nonzero tables, keyed by ``(i, j)`` with ``i < j``
    and sorted, so equal utilities-by-coefficients compare equal.
    """

    constant: Fraction
    unary: tuple[UnaryTable, ...]
    pairs: tuple[tuple[tuple[int, int], PairTable], ...] = ()

    def __post_init__(self) -> None:
        d = len(self.unary)
        keys = [k for k, _ in self.pairs]
        if keys != sorted(set(keys)):
            raise DomainError(f"Pair keys must be sorted and distinct, got {keys}")
        for (i, j), table in self.pairs:
            if not 0 <= i < j < d:
                raise DomainError(f"Pair ({i},{j}) is not an ordered pair of coordinates below {d}")
            if table == ZERO_PAIR:
                raise DomainError(f"Pair ({i},{j}) stores an all-zero table")

    @classmethod
    def build(
        cls,
        d: int,
        constant: Any = 0,
        unary: Mapping[int, Sequence[Any]] | Sequence[Sequence[Any]] | None = None,
        pairs: Mapping[tuple[int, int], Sequence[Sequence[Any]]] | None = None,
    ) -> ActionCoefficients:
        """Normalize loose input: pairs keyed ``(j, i)`` are transposed, repeats added."""
        tables = [ZERO_UNARY] * d
        if unary is not None:
            items = unary.items() if isinstance(unary, Mapping) else enumerate(unary)
            for i, values in items:
                if not 0 <= i < d:
                    raise DomainError(f"Unary coordinate {i} out of range for d={d}")
                tables[i] = unary_table(values)
        merged: dict[tuple[int, int], PairTable] = {}
        for (i, j), rows in (pairs or {}).items():
            if i == j or not (0 <= i < d and 0 <= j < d):
                raise DomainError(f"Pair ({i},{j}) is not a pair of distinct coordinates below {d}")
            table = pair_table(rows)
            key = (i, j) if i < j else (j, i)
            if i > j:
                table = transpose(table)
            merged[key] = _add_pair(merged.get(key, ZERO_PAIR), table)
        return cls(
            to_fraction(constant),
            tuple(tables),
            tuple(sorted((k, t) for k, t in merged.items() if t != ZERO_PAIR)),
        )

    @classmethod
    def zero(cls, d: int) -> ActionCoefficients:
        return cls(_ZERO, (ZERO_UNARY,) * d)

    @property
    def dimension(self) -> int:
        return len(self.unary)

    @cached_property
    def _pair_map(self) -> dict[tuple[int, int], PairTable]:
        return dict(self.pairs)

    def pair(self, i: int, j: int) -> PairTable:
        if i < j:
            return self._pair_map.get((i, j), ZERO_PAIR)
        return transpose(self._pair_map.get((j, i), ZERO_PAIR))

    def evaluate(self, x: Sequence[int]) -> Fraction:
        total = self.constant + sum((t[x[i]] for i, t in enumerate(self.unary)), _ZERO)
        for (i, j), t in self.pairs:
            total += t[x[i]][x[j]]
        return total

    def plus(self, other: ActionCoefficients) -> ActionCoefficients:
        if other.dimension != self.dimension:
            raise DomainError(f"Cannot add terms of dimension {self.dimension} and {other.dimension}")
        merged = dict(self.pairs)
        for k, t in other.pairs:
            merged[k] = _add_pair(merged.get(k, ZERO_PAIR), t)
        return ActionCoefficients(
            self.constant + other.constant,
            tuple((u[0] + v[0], u[1] + v[1]) for u, v in zip(self.unary, other.unary, strict=True)),
            tuple(sorted((k, t) for k, t in merged.items() if t != ZERO_PAIR)),
        )

    def scaled(self, beta: Fraction) -> ActionCoefficients:
        if beta == 0:
            return ActionCoefficients.zero(self.dimension)
        return ActionCoefficients(
            beta * self.constant,
            tuple((beta * u[0], beta * u[1]) for u in self.unary),
            tuple((k, _scale_pair(t, beta)) for k, t in self.pairs),
        )

    def extended(self) -> ActionCoefficients:
        """Same terms on one more (unused) trailing coordinate."""
        return ActionCoefficients(self.constant, (*self.unary, ZERO_UNARY), self.pairs)

    def permuted(self, perm: Sequence[int]) -> ActionCoefficients:
        """Move coordinate ``i`` to ``perm[i]``."""
        unary = [ZERO_UNARY] * self.dimension
        for i, t in enumerate(self.unary):
            unary[perm[i]] = t
        pairs = []
        for (i, j), t in self.pairs:
            a, b = perm[i], perm[j]
            pairs.append(((a, b), t) if a < b else ((b, a), transpose(t)))
        return ActionCoefficients(self.constant, tuple(unary), tuple(sorted(pairs)))


# ---------------------------------------------------------------------------
# Slices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairwiseSlice:
    d: int
    actions: tuple[str, ...]
    coeffs: tuple[ActionCoefficients, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 0:
            raise DomainError(f"Slice dimension must be a non-negative integer, got {self.d!r}")
        if not self.actions:
            raise DomainError("A slice needs at least one action")
        if len(set(self.actions)) != len(self.actions) or not all(isinstance(a, str) and a for a in self.actions):
            raise DomainError(f"Action identifiers must be distinct non-empty strings: {list(self.actions)}")
        if len(self.coeffs) != len(self.actions):
            raise DomainError(f"Expected {len(self.actions)} coefficient bundles, got {len(self.coeffs)}")
        for a, c in zip(self.actions, self.coeffs, strict=True):
            if c.dimension != self.d:
                raise DomainError(f"Coefficients for {a!r} have dimension {c.dimension}, expected {self.d}")

    @classmethod
    def build(cls, d: int, coeffs: Mapping[str, Mapping[str, Any]]) -> PairwiseSlice:
        """Build from ``{action: {"constant": c, "unary": ..., "pairs": ...}}`` in insertion order."""
        return cls(
            d,
            tuple(coeffs),
            tuple(
                ActionCoefficients.build(d, spec.get("constant", 0), spec.get("unary"), spec.get("pairs"))
                for spec in coeffs.values()
            ),
        )

    def coefficients(self, action: str) -> ActionCoefficients:
        try:
            return self.coeffs[self.actions.index(action)]
        except ValueError:
            raise DomainError(f"Unknown action {action!r}; actions are {list(self.actions)}") from None

    def utility(self, action: str, x: Sequence[int]) -> Fraction:
        return self.coefficients(action).evaluate(x)

    @property
    def space(self) -> CoordinateSpace:
        return CoordinateSpace.binary(self.d)

    def to_problem(self, budget: int | None = None) -> DecisionProblem:
        """Expand to the full utility table, refusing cubes larger than ``budget``."""
        expanded = self.__dict__.get("_expanded")
        if expanded is not None:
            self.space.check_budget(budget)
        else:
            states = self.space.states(budget)
            expanded = DecisionProblem(
                self.space, self.actions, tuple(tuple(c.evaluate(s) for s in states) for c in self.coeffs)
            )
            object.__setattr__(self, "_expanded", expanded)
        return expanded


# ---------------------------------------------------------------------------
# Mixed differences
# ---------------------------------------------------------------------------


def _check_pair(slc: PairwiseSlice, i: int, j: int) -> None:
    if i == j:
        raise DomainError(f"Mixed differences need two distinct coordinates, got {i} twice")
    for k in (i, j):
        if not 0 <= k < slc.d:
            raise DomainError(f"Coordinate {k} is out of range for d={slc.d}")


def _corner_values(c: ActionCoefficients, d: int, i: int, j: int) -> tuple[Fraction, ...]:
    out = []
    for xi, xj in ((0, 0), (1, 0), (0, 1), (1, 1)):
        x = [0] * d
        x[i], x[j] = xi, xj
        out.append(c.evaluate(x))
    return tuple(out)


def mixed_difference(slc: PairwiseSlice, i: int, j: int, a: str) -> Fraction:
    _check_pair(slc, i, j)
    u00, u10, u01, u11 = _corner_values(slc.coefficients(a), slc.d, i, j)
    return u00 - u10 - u01 + u11


def gap_mixed_difference(slc: PairwiseSlice, i: int, j: int, a: str, b: str) -> Fraction:
    if a == b:
        raise DomainError("Gap mixed differences need two distinct actions")
    return mixed_difference(slc, i, j, a) - mixed_difference(slc, i, j, b)


# ---------------------------------------------------------------------------
# Interaction graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InteractionEdge:
    i: int
    j: int
    action: str
    other: str | None
    value: Fraction


@dataclass(frozen=True)
class InteractionGraph:
    d: int
    mode: str
    edges: tuple[InteractionEdge, ...]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(e.i, e.j) for e in self.edges}

    def as_graph(self) -> nx.Graph:
        g = nx.Graph(mode=self.mode)
        g.add_nodes_from(range(self.d))
        for e in self.edges:
            g.add_edge(e.i, e.j, action=e.action, other=e.other, value=e.value)
        return g

    def verify(self, slc: PairwiseSlice) -> bool:
        """Re-evaluate every witness and compare it with the recorded value."""
        for e in self.edges:
            if e.other is None:
                value = mixed_difference(slc, e.i, e.j, e.action)
            else:
                value = gap_mixed_difference(slc, e.i, e.j, e.action, e.other)
            if value == 0 or value != e.value:
                return False
        return True

    def to_dot(self) -> str:
        lines = [f'graph "{self.mode}" {{']
        lines += [f"  {v};" for v in range(self.d)]
        for e in self.edges:
            who = e.action if e.other is None else f"{e.action}-{e.other}"
            lines.append(f'  {e.i} -- {e.j} [label="{who} {e.value.numerator}/{e.value.denominator}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def supported_actions(slc: PairwiseSlice, budget: int | None = None) -> tuple[str, ...]:
    """Actions optimal at some state, in declaration order."""
    problem = slc.to_problem(budget)
    seen: set[str] = set()
    for p in range(problem.size):
        seen |= problem.opt_at(p)
    return tuple(a for a in slc.actions if a in seen)


def interaction_graph(slc: PairwiseSlice, mode: str = "raw", budget: int | None = None) -> InteractionGraph:
    if mode not in GRAPH_MODES:
        raise DomainError(f"Unknown graph mode {mode!r}; expected one of {GRAPH_MODES}")
    if mode == "raw":
        slc.space.check_budget(budget)
    candidates = slc.actions if mode == "decision" else supported_actions(slc, budget)
    edges = []
    for i, j in itertools.combinations(range(slc.d), 2):
        if mode == "raw":
            for a in slc.actions:
                value = mixed_difference(slc, i, j, a)
                if value != 0:
                    edges.append(InteractionEdge(i, j, a, None, value))
                    break
            continue
        for a, b in itertools.combinations(candidates, 2):
            value = gap_mixed_difference(slc, i, j, a, b)
            if value != 0:
                edges.append(InteractionEdge(i, j, a, b, value))
                break
    return InteractionGraph(slc.d, mode, tuple(edges))


# ---------------------------------------------------------------------------
# Symmetry and the dichotomy
# ---------------------------------------------------------------------------


def symmetry_counterexample(slc: PairwiseSlice, budget: int | None = None) -> tuple[str, State, int] | None:
    """``(action, state, t)`` where swapping coordinates t, t+1 changes utility."""
    states = slc.space.states(budget)
    for t in range(slc.d - 1):
        for a, c in zip(slc.actions, slc.coeffs, strict=True):
            for x in states:
                y = list(x)
                y[t], y[t + 1] = y[t + 1], y[t]
                if c.evaluate(x) != c.evaluate(y):
                    return a, x, t
    return None


def symmetry_check(slc: PairwiseSlice, budget: int | None = None) -> bool:
    return symmetry_counterexample(slc, budget) is None


@dataclass(frozen=True)
class DichotomyReport:
    verdict: str
    edge_count: int | None = None
    counterexample: tuple[str, State, int] | None = None


def dichotomy_report(slc: PairwiseSlice, budget: int | None = None) -> DichotomyReport:
    witness = symmetry_counterexample(slc, budget)
    if witness is not None:
        return DichotomyReport("not_applicable", counterexample=witness)
    count = len(interaction_graph(slc, "decision", budget).edges)
    if count == 0:
        return DichotomyReport("unary_collapse", 0)
    if count == slc.d * (slc.d - 1) // 2:
        return DichotomyReport("complete_interaction", count)
    raise TheoryViolation(
        "symmetric slice has a decision-relevant graph that is neither edgeless nor complete",
        witness={"edge_count": count, "d": slc.d},
    )


# ---------------------------------------------------------------------------
# Obstruction target predicates
# ---------------------------------------------------------------------------


def _pair_magnitudes(slc: PairwiseSlice) -> list[tuple[tuple[int, int], str, Fraction]]:
    return [
        ((i, j), a, abs(mixed_difference(slc, i, j, a)))
        for i, j in itertools.combinations(range(slc.d), 2)
        for a in slc.actions
    ]


def target_predicate(slc: PairwiseSlice, kind: str) -> bool:
    if kind not in TARGET_KINDS:
        raise DomainError(f"Unknown target predicate {kind!r}; expected one of {TARGET_KINDS}")
    need = 2 if kind == "margin_bounded" else 3
    if slc.d < need:
        raise DomainError(f"Predicate {kind} needs at least {need} coordinates, slice has {slc.d}")

    if kind == "dominant_pair":
        mags = _pair_magnitudes(slc)
        top = max(m for _, _, m in mags)
        winners = [(pair, a) for pair, a, m in mags if m == top]
        return len(winners) == 1 and winners[0][0] == (0, 1)
    if kind == "margin_bounded":
        bound = 2 * max(m for _, _, m in _pair_magnitudes(slc))
        return all(abs(v) <= bound for c in slc.coeffs for table in c.unary for v in table)
    if kind == "ghost_action":
        minus_one = (Fraction(-1), Fraction(-1))
        return any(
            c.unary[0] == minus_one and abs(mixed_difference(slc, 0, 1, a)) == 1
            for a, c in zip(slc.actions, slc.coeffs, strict=True)
        )
    anchor = {abs(mixed_difference(slc, 0, 1, a)) for a in slc.actions}
    return 1 in anchor and 0 in anchor
