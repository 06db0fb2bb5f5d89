"""Constructive realizations of labelings and equivalence relations as optimizer quotients."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    State,
    first_appearance_index,
    quotient,
)
from relevance_mcp_server.helpers import DomainError

_ONE = Fraction(1)
_ZERO = Fraction(0)


@dataclass(frozen=True)
class Labeling:
    """One label per state, in lexicographic state order."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    def label_range(self) -> list[str]:
        return list(dict.fromkeys(self.labels))

    def kernel(self) -> tuple[int, ...]:
        return first_appearance_index(self.labels)[0]


def realize_labeling(space: CoordinateSpace, phi: Labeling, budget: int | None = None) -> DecisionProblem:
    """Indicator problem whose unique optimizer at ``s`` is ``phi(s)``."""
    states = space.states(budget)
    if not states:
        raise DomainError("Cannot realize a labeling on an empty state space")
    if len(phi.labels) != len(states):
        raise DomainError(f"Labeling has {len(phi.labels)} labels, the space has {len(states)} states")
    actions = phi.label_range()
    rows = tuple(tuple(_ONE if a == lab else _ZERO for lab in phi.labels) for a in actions)
    return DecisionProblem(space, tuple(actions), rows)


def realize_equivalence(
    space: CoordinateSpace, partition: Sequence[Sequence[Sequence[int]]], budget: int | None = None
) -> DecisionProblem:
    """Realize a set partition of the states; block ``k`` becomes action ``c{k}``."""
    states = space.states(budget)
    block_of: dict[State, int] = {}
    overlapping: list[State] = []
    foreign: list[State] = []
    for k, block in enumerate(partition):
        for raw in block:
            s = tuple(raw)
            if not space.contains(s):
                foreign.append(s)
            elif s in block_of:
                overlapping.append(s)
            else:
                block_of[s] = k
    missing = [s for s in states if s not in block_of]
    if overlapping or missing or foreign:
        parts = []
        if overlapping:
            parts.append(f"states in more than one block: {overlapping}")
        if missing:
            parts.append(f"states in no block: {missing}")
        if foreign:
            parts.append(f"states outside the space: {foreign}")
        raise DomainError("Blocks do not partition the state space; " + "; ".join(parts))
    return realize_labeling(space, Labeling(tuple(f"c{block_of[s]}" for s in states)), budget)


def partition_of(problem: DecisionProblem) -> list[list[State]]:
    """Quotient blocks as lists of states, in first-appearance order."""
    return [[problem.states[p] for p in block] for block in quotient(problem).blocks()]
