"""Finite decision problems, optimizer sets, and the decision quotient.

A decision problem is a finite coordinate state space, an ordered list of
action identifiers, and an exact rational utility for every (action, state)
pair.  Everything certification cares about is a function of the optimizer
set ``Opt(s)``: the quotient groups states with equal optimizer sets, a
coordinate set is *sufficient* when agreement on it forces equal optimizer
sets, and a coordinate is *relevant* when erasing it breaks sufficiency of
all the others.

Two tiers share one type.  A problem on the *product* tier enumerates the
full product of its coordinate domains in lexicographic order.  A problem on
the *abstract* tier carries an explicit ordered carrier of coordinate states
(duplicates allowed); every operation then works on carrier positions.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any

from relevance_mcp_server.helpers import (
    BudgetExceededError,
    DomainError,
    TheoryViolation,
    resolve_budget,
    resolve_subset_cap,
)

logger = logging.getLogger(__name__)

State = tuple[int, ...]


# ---------------------------------------------------------------------------
# Exact rationals
# ---------------------------------------------------------------------------


def to_fraction(value: Any) -> Fraction:
    """Convert an int, ``Fraction`` or ``"p/q"``/decimal string to a ``Fraction``.

    Floats are refused: a binary float cannot represent most decimal inputs
    and would corrupt tie detection.
    """
    if isinstance(value, bool | float):
        raise TypeError(f"Expected an exact rational, got {type(value).__name__} {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"Not a rational: {value!r}") from exc
    raise TypeError(f"Expected an exact rational, got {type(value).__name__} {value!r}")


def first_appearance_index(labels: Iterable[Hashable]) -> tuple[tuple[int, ...], list[Hashable]]:
    """Number labels 0, 1, ... in order of first appearance."""
    index: dict[Hashable, int] = {}
    out: list[int] = []
    for label in labels:
        out.append(index.setdefault(label, len(index)))
    return tuple(out), list(index)


# ---------------------------------------------------------------------------
# Spaces and problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateSpace:
    domains: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(self.domains))
        for i, k in enumerate(self.domains):
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise DomainError(f"Coordinate {i} has cardinality {k!r}; every cardinality must be >= 1")

    @classmethod
    def binary(cls, d: int) -> CoordinateSpace:
        return cls((2,) * d)

    @property
    def dimension(self) -> int:
        return len(self.domains)

    @property
    def size(self) -> int:
        return math.prod(self.domains)

    @property
    def is_binary(self) -> bool:
        return all(k == 2 for k in self.domains)

    def check_budget(self, budget: int | None = None) -> None:
        limit = resolve_budget(budget)
        if self.size > limit:
            raise BudgetExceededError(self.size, limit)

    def states(self, budget: int | None = None) -> tuple[State, ...]:
        """All states in lexicographic order."""
        self.check_budget(budget)
        return tuple(itertools.product(*(range(k) for k in self.domains)))

    def contains(self, state: Sequence[int]) -> bool:
        return len(state) == len(self.domains) and all(
            isinstance(v, int) and 0 <= v < k for v, k in zip(state, self.domains, strict=True)
        )

    def index_of(self, state: Sequence[int]) -> int:
        if not self.contains(state):
            raise DomainError(f"State {tuple(state)} is not in the space {list(self.domains)}")
        idx = 0
        for v, k in zip(state, self.domains, strict=True):
            idx = idx * k + v
        return idx


@dataclass(frozen=True)
class DecisionProblem:
    """Utility table ``utility[action_index][position]`` over a space or carrier."""

    space: CoordinateSpace
    actions: tuple[str, ...]
    utility: tuple[tuple[Fraction, ...], ...]
    carrier: tuple[State, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "utility", tuple(tuple(row) for row in self.utility))
        if self.carrier is not None:
            object.__setattr__(self, "carrier", tuple(tuple(s) for s in self.carrier))
        if not self.actions:
            raise DomainError("A decision problem needs at least one action")
        for a in self.actions:
            if not isinstance(a, str) or not a:
                raise DomainError(f"Action identifiers must be non-empty strings, got {a!r}")
        if len(set(self.actions)) != len(self.actions):
            raise DomainError(f"Duplicate action identifiers in {list(self.actions)}")
        if self.carrier is not None:
            if not self.carrier:
                raise DomainError("The carrier must contain at least one state")
            for s in self.carrier:
                if not self.space.contains(s):
                    raise DomainError(f"Carrier state {s} is not in the space {list(self.space.domains)}")
        if len(self.utility) != len(self.actions):
            raise DomainError(f"Expected {len(self.actions)} utility rows, got {len(self.utility)}")
        n = self.size
        for a, row in zip(self.actions, self.utility, strict=True):
            if len(row) != n:
                raise DomainError(f"Utility row for action {a!r} has {len(row)} values, expected {n}")
            for v in row:
                if not isinstance(v, Fraction):
                    raise TypeError(f"Utility values must be Fractions, got {type(v).__name__} for {a!r}")

    # --- construction ---------------------------------------------------

    @classmethod
    def from_function(
        cls,
        space: CoordinateSpace,
        actions: Sequence[str],
        fn: Callable[[str, State], Any],
        budget: int | None = None,
    ) -> DecisionProblem:
        states = space.states(budget)
        return cls(space, tuple(actions), tuple(tuple(to_fraction(fn(a, s)) for s in states) for a in actions))

    @classmethod
    def from_table(
        cls,
        space: CoordinateSpace,
        actions: Sequence[str],
        table: Mapping[str, Sequence[Any]],
        carrier: Sequence[State] | None = None,
    ) -> DecisionProblem:
        missing = [a for a in actions if a not in table]
        if missing:
            raise DomainError(f"No utility row for actions {missing}")
        rows = tuple(tuple(to_fraction(v) for v in table[a]) for a in actions)
        return cls(space, tuple(actions), rows, None if carrier is None else tuple(map(tuple, carrier)))

    # --- shape ----------------------------------------------------------

    @property
    def is_product(self) -> bool:
        return self.carrier is None

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def size(self) -> int:
        """Number of state positions."""
        return self.space.size if self.carrier is None else len(self.carrier)

    def check_budget(self, budget: int | None = None) -> None:
        limit = resolve_budget(budget)
        if self.size > limit:
            raise BudgetExceededError(self.size, limit)

    def states_within(self, budget: int | None = None) -> tuple[State, ...]:
        """State positions in order, refusing problems larger than ``budget``."""
        self.check_budget(budget)
        return self.states

    @cached_property
    def states(self) -> tuple[State, ...]:
        if self.carrier is not None:
            return self.carrier
        # one state per utility column, already materialised by the rows
        return tuple(itertools.product(*(range(k) for k in self.space.domains)))

    @cached_property
    def _first_position(self) -> dict[State, int]:
        out: dict[State, int] = {}
        for pos, s in enumerate(self.states):
            out.setdefault(s, pos)
        return out

    @cached_property
    def _action_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.actions)}

    def position(self, state: Sequence[int]) -> int:
        key = tuple(state)
        if self.carrier is None:
            return self.space.index_of(key)
        try:
            return self._first_position[key]
        except KeyError:
            raise DomainError(f"State {key} is not in the carrier") from None

    def action_index(self, action: str) -> int:
        try:
            return self._action_index[action]
        except KeyError:
            raise DomainError(f"Unknown action {action!r}; actions are {list(self.actions)}") from None

    def value(self, action: str, state: Sequence[int]) -> Fraction:
        return self.utility[self.action_index(action)][self.position(state)]

    def row(self, action: str) -> tuple[Fraction, ...]:
        return self.utility[self.action_index(action)]

    @cached_property
    def _optimizer_sets(self) -> tuple[frozenset[str], ...]:
        out = []
        for pos in range(self.size):
            best = max(row[pos] for row in self.utility)
            out.append(frozenset(a for a, row in zip(self.actions, self.utility, strict=True) if row[pos] == best))
        return tuple(out)

    def opt_at(self, position: int) -> frozenset[str]:
        return self._optimizer_sets[position]


# ---------------------------------------------------------------------------
# Optimizer sets and the quotient
# ---------------------------------------------------------------------------


def optimizer_set(problem: DecisionProblem, state: Sequence[int]) -> frozenset[str]:
    """Every action achieving the maximum utility at *state*."""
    return problem.opt_at(problem.position(state))


@dataclass(frozen=True)
class QuotientPartition:
    class_of: tuple[int, ...]
    classes: tuple[frozenset[str], ...]

    @property
    def count(self) -> int:
        return len(self.classes)

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.classes]
        for pos, c in enumerate(self.class_of):
            out[c].append(pos)
        return out

    def same_partition(self, other: QuotientPartition) -> bool:
        # first-appearance numbering is canonical, so equal partitions have equal class_of
        return self.class_of == other.class_of


def quotient(problem: DecisionProblem, budget: int | None = None) -> QuotientPartition:
    problem.check_budget(budget)
    class_of, classes = first_appearance_index(problem.opt_at(p) for p in range(problem.size))
    return QuotientPartition(class_of, tuple(classes))  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Sufficiency and relevance
# ---------------------------------------------------------------------------


def labels_sufficiency_witness(
    states: Sequence[State], labels: Sequence[Hashable], coords: Sequence[int]
) -> tuple[int, int] | None:
    """Two positions agreeing on *coords* with different labels, or ``None``.

    Single pass: each projection group remembers its first position and every
    later member is compared against it.
    """
    seen: dict[tuple[int, ...], int] = {}
    for pos, s in enumerate(states):
        first = seen.setdefault(tuple(s[i] for i in coords), pos)
        if labels[first] != labels[pos]:
            return first, pos
    return None


def labels_sufficient(states: Sequence[State], labels: Sequence[Hashable], coords: Sequence[int]) -> bool:
    return labels_sufficiency_witness(states, labels, coords) is None


def _coords(problem: DecisionProblem, coords: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(coords)))
    for i in out:
        if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < problem.dimension:
            raise DomainError(f"Coordinate {i!r} is out of range for dimension {problem.dimension}")
    return out


def sufficiency_witness(
    problem: DecisionProblem, coords: Iterable[int], budget: int | None = None
) -> tuple[State, State] | None:
    q = quotient(problem, budget)
    hit = labels_sufficiency_witness(problem.states, q.class_of, _coords(problem, coords))
    if hit is None:
        return None
    return problem.states[hit[0]], problem.states[hit[1]]


def is_sufficient(problem: DecisionProblem, coords: Iterable[int], budget: int | None = None) -> bool:
    return sufficiency_witness(problem, coords, budget) is None


def is_sufficient_bruteforce(problem: DecisionProblem, coords: Iterable[int]) -> bool:
    """All-pairs oracle for :func:`is_sufficient`."""
    idx = _coords(problem, coords)
    states = problem.states
    for p, q in itertools.combinations(range(problem.size), 2):
        if all(states[p][i] == states[q][i] for i in idx) and problem.opt_at(p) != problem.opt_at(q):
            return False
    return True


def _others(problem: DecisionProblem, i: int) -> tuple[int, ...]:
    if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < problem.dimension:
        raise DomainError(f"Coordinate {i!r} is out of range for dimension {problem.dimension}")
    return tuple(j for j in range(problem.dimension) if j != i)


def relevance_witness(
    problem: DecisionProblem, i: int, budget: int | None = None
) -> tuple[State, State] | None:
    return sufficiency_witness(problem, _others(problem, i), budget)


def is_relevant(problem: DecisionProblem, i: int, budget: int | None = None) -> bool:
    return relevance_witness(problem, i, budget) is not None


# ---------------------------------------------------------------------------
# Certification profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificationProfile:
    relevant: frozenset[int]
    minimal_sufficient: frozenset[int] | None
    srank: int
    quotient_count: int
    sufficient_family_generator: frozenset[int] | None
    capacity: int

    @property
    def within_capacity(self) -> bool:
        return self.quotient_count <= self.capacity


def _all_subsets(d: int) -> Iterable[tuple[int, ...]]:
    return itertools.chain.from_iterable(itertools.combinations(range(d), r) for r in range(d + 1))


def certification_profile(
    problem: DecisionProblem,
    *,
    budget: int | None = None,
    subset_cap: int | None = None,
    check: bool = False,
) -> CertificationProfile:
    """Relevant set, minimal sufficient set, srank and quotient size.

    With *check* the structural guarantees of product spaces are verified by
    brute force: the relevant set is sufficient, a set is sufficient exactly
    when it contains the relevant set (all subsets when ``d <= subset_cap``),
    and the quotient fits in the product of the relevant domains.
    """
    q = quotient(problem, budget)
    states, labels, d = problem.states_within(budget), q.class_of, problem.dimension
    relevant = frozenset(
        i for i in range(d) if not labels_sufficient(states, labels, [j for j in range(d) if j != i])
    )
    if labels_sufficient(states, labels, sorted(relevant)):
        minimal: frozenset[int] | None = relevant
        generator: frozenset[int] | None = relevant
    else:
        generator = None
        minimal = _eliminate(states, labels, d)
    profile = CertificationProfile(
        relevant=relevant,
        minimal_sufficient=minimal,
        srank=len(relevant),
        quotient_count=q.count,
        sufficient_family_generator=generator,
        capacity=math.prod(problem.space.domains[i] for i in relevant),
    )
    if check and problem.is_product:
        _self_check(problem, profile, labels, resolve_subset_cap(subset_cap))
    return profile


def _eliminate(states: Sequence[State], labels: Sequence[Hashable], d: int) -> frozenset[int] | None:
    current = list(range(d))
    if not labels_sufficient(states, labels, current):
        return None
    for i in range(d):
        trial = [j for j in current if j != i]
        if labels_sufficient(states, labels, trial):
            current = trial
    return frozenset(current)


def _self_check(
    problem: DecisionProblem, profile: CertificationProfile, labels: Sequence[int], subset_cap: int
) -> None:
    states = problem.states
    if profile.sufficient_family_generator is None:
        raise TheoryViolation(
            "relevant set is not sufficient on a product space",
            witness={"relevant": sorted(profile.relevant)},
        )
    if not profile.within_capacity:
        raise TheoryViolation(
            "quotient is larger than the relevant coordinates can distinguish",
            witness={"m": profile.quotient_count, "capacity": profile.capacity},
        )
    if problem.dimension <= subset_cap:
        for subset in _all_subsets(problem.dimension):
            expected = profile.relevant <= set(subset)
            if labels_sufficient(states, labels, subset) != expected:
                raise TheoryViolation(
                    "sufficient sets do not form the principal filter of the relevant set",
                    witness={"subset": list(subset), "relevant": sorted(profile.relevant)},
                )
    logger.debug("self-check passed: relevant=%s m=%d", sorted(profile.relevant), profile.quotient_count)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def _check_summary(problem: DecisionProblem, summary: Sequence[Hashable]) -> None:
    if len(summary) != problem.size:
        raise DomainError(f"Summary has {len(summary)} symbols, expected one per state ({problem.size})")


def summary_refines_quotient(problem: DecisionProblem, summary: Sequence[Hashable]) -> bool:
    """True iff every fiber of *summary* lies inside one quotient class."""
    _check_summary(problem, summary)
    class_of = quotient(problem).class_of
    seen: dict[Hashable, int] = {}
    return all(seen.setdefault(sym, c) == c for sym, c in zip(summary, class_of, strict=True))


def distinct_symbol_count(summary: Sequence[Hashable]) -> int:
    return len(set(summary))
