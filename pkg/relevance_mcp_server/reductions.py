"""Semantic transfers into decision problems, profile compression, and Boolean presentations.

An admissibility specification says which outputs are acceptable at each
state.  Inducing a problem from it makes the acceptable outputs exactly the
optimal actions, so sufficiency of a coordinate set for the problem is the
same thing as the coordinates determining the admissible-output set.

States are addressed by position: the lexicographic enumeration of the space,
or an explicit carrier when one is given.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, ClassVar

from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    State,
    first_appearance_index,
    labels_sufficient,
    quotient,
    to_fraction,
)
from relevance_mcp_server.helpers import Check, CheckReport, DomainError, TheoryViolation, resolve_subset_cap
from relevance_mcp_server.pairwise import PairwiseSlice

logger = logging.getLogger(__name__)

FAILURE_TOKEN = "_bottom"
FAILURE_SYMBOL = "⊥"
PRESENTATION_MODES = ("binary", "indicator", "single")


def render_output(output: str) -> str:
    return FAILURE_SYMBOL if output == FAILURE_TOKEN else output


def _states(space: CoordinateSpace, carrier: Sequence[State] | None, budget: int | None) -> tuple[State, ...]:
    if carrier is None:
        return space.states(budget)
    out = tuple(tuple(s) for s in carrier)
    for s in out:
        if not space.contains(s):
            raise DomainError(f"Carrier state {s} is not in the space {list(space.domains)}")
    return out


def _check_outputs(outputs: Sequence[str]) -> None:
    if FAILURE_TOKEN in outputs:
        raise DomainError(f"Output id {FAILURE_TOKEN!r} is reserved for the failure token")
    if len(set(outputs)) != len(outputs):
        raise DomainError(f"Duplicate output ids in {list(outputs)}")


# ---------------------------------------------------------------------------
# Specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeterministicSpec:
    """One required output per state position."""

    variant: ClassVar[str] = "deterministic"
    outputs: tuple[str, ...]
    values: tuple[str, ...]

    def admissible_sets(self, states: Sequence[State]) -> list[frozenset[str]]:
        _check_outputs(self.outputs)
        if not self.outputs:
            raise DomainError("A deterministic specification needs a non-empty output universe")
        if len(self.values) != len(states):
            raise DomainError(f"Expected {len(states)} values, one per state, got {len(self.values)}")
        unknown = sorted({v for v in self.values if v not in self.outputs})
        if unknown:
            raise DomainError(f"Values {unknown} are not in the output universe")
        return [frozenset((v,)) for v in self.values]


class _GappedSpec:
    allowed: Fraction
    blocked: Fraction

    def _check_gap(self) -> None:
        if not self.blocked < self.allowed:
            raise DomainError(f"Gap must be strict: blocked {self.blocked} is not below allowed {self.allowed}")


@dataclass(frozen=True)
class SetValuedSpec(_GappedSpec):
    variant: ClassVar[str] = "set_valued"
    outputs: tuple[str, ...] = ()
    sets: tuple[frozenset[str], ...] = ()
    allowed: Fraction = Fraction(1)
    blocked: Fraction = Fraction(0)

    def admissible_sets(self, states: Sequence[State]) -> list[frozenset[str]]:
        _check_outputs(self.outputs)
        self._check_gap()
        if len(self.sets) != len(states):
            raise DomainError(f"Expected {len(states)} output sets, one per state, got {len(self.sets)}")
        for pos, fiber in enumerate(self.sets):
            unknown = sorted(fiber - set(self.outputs))
            if unknown:
                raise DomainError(f"State {states[pos]} admits unknown outputs {unknown}")
        return [frozenset(f) for f in self.sets]


@dataclass(frozen=True)
class RelationalSpec(_GappedSpec):
    """Admissible ``(state, output)`` pairs; unlisted states admit nothing."""

    variant: ClassVar[str] = "relational"
    outputs: tuple[str, ...] = ()
    pairs: tuple[tuple[State, str], ...] = ()
    allowed: Fraction = Fraction(1)
    blocked: Fraction = Fraction(0)

    def admissible_sets(self, states: Sequence[State]) -> list[frozenset[str]]:
        _check_outputs(self.outputs)
        self._check_gap()
        where: dict[State, list[int]] = {}
        for pos, s in enumerate(states):
            where.setdefault(s, []).append(pos)
        fibers: list[set[str]] = [set() for _ in states]
        for s, out in self.pairs:
            s = tuple(s)
            if s not in where:
                raise DomainError(f"Pair references unknown state {s}")
            if out not in self.outputs:
                raise DomainError(f"Pair references unknown output {out!r}")
            for pos in where[s]:
                fibers[pos].add(out)
        return [frozenset(f) for f in fibers]


AdmissibilitySpec = DeterministicSpec | SetValuedSpec | RelationalSpec


# ---------------------------------------------------------------------------
# Transfer
# ---------------------------------------------------------------------------


def induce_problem(
    spec: AdmissibilitySpec,
    space: CoordinateSpace,
    *,
    carrier: Sequence[State] | None = None,
    budget: int | None = None,
) -> DecisionProblem:
    """Problem whose optimizer set at each state is the admissible-output set.

    Empty fibers are totalized: the failure token joins the actions and is the
    sole optimizer exactly where nothing is admissible.
    """
    states = _states(space, carrier, budget)
    fibers = spec.admissible_sets(states)
    hi, lo = (Fraction(1), Fraction(0)) if isinstance(spec, DeterministicSpec) else (spec.allowed, spec.blocked)
    actions = list(spec.outputs)
    totalized = any(not f for f in fibers)
    if totalized:
        actions.append(FAILURE_TOKEN)
    if not actions:
        raise DomainError("Nothing to induce: the output universe is empty and every fiber is non-empty")
    rows = []
    for a in actions:
        if a == FAILURE_TOKEN:
            rows.append(tuple(hi if not f else lo for f in fibers))
        else:
            rows.append(tuple(hi if a in f else lo for f in fibers))
    if totalized:
        logger.debug("totalized %d empty fibers", sum(1 for f in fibers if not f))
    return DecisionProblem(space, tuple(actions), tuple(rows), None if carrier is None else states)


def admissible_equivalence(
    spec: AdmissibilitySpec,
    space: CoordinateSpace,
    *,
    carrier: Sequence[State] | None = None,
    budget: int | None = None,
) -> tuple[int, ...]:
    """Class index per state position; states share a class when their admissible sets agree."""
    states = _states(space, carrier, budget)
    return first_appearance_index(spec.admissible_sets(states))[0]


def relation_sufficient(
    spec: AdmissibilitySpec,
    space: CoordinateSpace,
    coords: Sequence[int],
    *,
    carrier: Sequence[State] | None = None,
    budget: int | None = None,
) -> bool:
    states = _states(space, carrier, budget)
    return labels_sufficient(states, spec.admissible_sets(states), sorted(set(coords)))


def relation_relevant(
    spec: AdmissibilitySpec,
    space: CoordinateSpace,
    i: int,
    *,
    carrier: Sequence[State] | None = None,
    budget: int | None = None,
) -> bool:
    if not 0 <= i < space.dimension:
        raise DomainError(f"Coordinate {i} is out of range for dimension {space.dimension}")
    others = [j for j in range(space.dimension) if j != i]
    return not relation_sufficient(spec, space, others, carrier=carrier, budget=budget)


def transfer_check(
    spec: AdmissibilitySpec,
    space: CoordinateSpace,
    *,
    carrier: Sequence[State] | None = None,
    budget: int | None = None,
    subset_cap: int | None = None,
) -> CheckReport:
    """Compare the relation-level definitions with the induced problem, side by side.

    Every subset is compared when ``d <= subset_cap``; above the cap only the
    full set and the coordinate complements are.
    """
    states = _states(space, carrier, budget)
    fibers = spec.admissible_sets(states)
    problem = induce_problem(spec, space, carrier=carrier, budget=budget)
    rel_labels = first_appearance_index(fibers)[0]
    labels = quotient(problem).class_of
    d = space.dimension
    checks = [Check("partition", rel_labels == labels, {} if rel_labels == labels else {"relation": list(rel_labels)})]

    if d <= resolve_subset_cap(subset_cap):
        subsets = itertools.chain.from_iterable(itertools.combinations(range(d), r) for r in range(d + 1))
    else:
        subsets = [tuple(range(d)), *(tuple(j for j in range(d) if j != i) for i in range(d))]
    bad = next(
        (s for s in subsets if labels_sufficient(states, fibers, s) != labels_sufficient(states, labels, s)),
        None,
    )
    checks.append(Check("sufficiency", bad is None, {} if bad is None else {"subset": list(bad)}))

    def relevant(lab: Sequence[Hashable], i: int) -> bool:
        return not labels_sufficient(states, lab, [j for j in range(d) if j != i])

    diff = [i for i in range(d) if relevant(fibers, i) != relevant(labels, i)]
    checks.append(Check("relevance", not diff, {"coordinates": diff} if diff else {}))

    if FAILURE_TOKEN in problem.actions:
        wrong = [
            list(states[p])
            for p, f in enumerate(fibers)
            if (FAILURE_TOKEN in problem.opt_at(p)) != (not f)
        ]
        checks.append(Check("totalization", not wrong, {"states": wrong} if wrong else {}))
    return CheckReport(tuple(checks))


# ---------------------------------------------------------------------------
# Threshold admissibility
# ---------------------------------------------------------------------------


def threshold_admissibility(losses: Mapping[str, Any], tau: Any) -> frozenset[str]:
    """Hypotheses whose exact loss is at most *tau*."""
    bound = to_fraction(tau)
    return frozenset(h for h, loss in losses.items() if to_fraction(loss) <= bound)


def pass_bits(losses: Mapping[str, Any], tau: Any) -> State:
    ok = threshold_admissibility(losses, tau)
    return tuple(int(h in ok) for h in losses)


def pass_bit_spec(
    hypotheses: Sequence[str], always_pass: Sequence[str] = (), always_fail: Sequence[str] = ()
) -> tuple[CoordinateSpace, tuple[State, ...], SetValuedSpec]:
    """Set-valued spec on the pass-bit cube, restricted to the named subdomain.

    Coordinate ``i`` is the pass bit of ``hypotheses[i]``; the admissible set
    at a bit vector is the set of passing hypotheses.
    """
    hyps = tuple(hypotheses)
    unknown = sorted((set(always_pass) | set(always_fail)) - set(hyps))
    if unknown:
        raise DomainError(f"Unknown hypotheses {unknown}")
    if set(always_pass) & set(always_fail):
        raise DomainError("A hypothesis cannot both always pass and always fail")
    fixed = {hyps.index(h): 1 for h in always_pass} | {hyps.index(h): 0 for h in always_fail}
    space = CoordinateSpace.binary(len(hyps))
    carrier = tuple(x for x in space.states() if all(x[i] == v for i, v in fixed.items()))
    sets = tuple(frozenset(h for h, bit in zip(hyps, x, strict=True) if bit) for x in carrier)
    return space, carrier, SetValuedSpec(outputs=hyps, sets=sets)


# ---------------------------------------------------------------------------
# Distinct-profile compression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompressedProfiles:
    result: DecisionProblem | PairwiseSlice
    profiles: dict[str, tuple[str, ...]]

    @property
    def distinct(self) -> int:
        return len(self.profiles)


def compress_profiles(
    obj: DecisionProblem | PairwiseSlice,
    *,
    budget: int | None = None,
    subset_cap: int | None = None,
    check: bool = False,
) -> CompressedProfiles:
    """Merge actions with identical utility profiles; the first of each group represents it."""
    problem = obj.to_problem(budget) if isinstance(obj, PairwiseSlice) else obj
    if isinstance(obj, DecisionProblem):
        problem.check_budget(budget)
    groups: dict[tuple[Fraction, ...], list[str]] = {}
    for a, row in zip(problem.actions, problem.utility, strict=True):
        groups.setdefault(row, []).append(a)
    profiles = {members[0]: tuple(members) for members in groups.values()}
    keep = list(profiles)
    if isinstance(obj, PairwiseSlice):
        result: DecisionProblem | PairwiseSlice = PairwiseSlice(
            obj.d, tuple(keep), tuple(obj.coefficients(a) for a in keep)
        )
        compressed = result.to_problem(budget)
    else:
        result = DecisionProblem(obj.space, tuple(keep), tuple(obj.row(a) for a in keep), obj.carrier)
        compressed = result
    if check:
        _check_compression(problem, compressed, resolve_subset_cap(subset_cap))
    logger.debug("compressed %d actions to %d profiles", len(problem.actions), len(keep))
    return CompressedProfiles(result, profiles)


def _check_compression(before: DecisionProblem, after: DecisionProblem, cap: int) -> None:
    l0, l1 = quotient(before).class_of, quotient(after).class_of
    d = before.dimension
    if d > cap:
        return
    for r in range(d + 1):
        for subset in itertools.combinations(range(d), r):
            if labels_sufficient(before.states, l0, subset) != labels_sufficient(after.states, l1, subset):
                raise TheoryViolation(
                    "profile compression changed sufficiency", witness={"subset": list(subset)}
                )


# ---------------------------------------------------------------------------
# Boolean presentations
# ---------------------------------------------------------------------------


def _bits(value: int, width: int) -> State:
    return tuple((value >> (width - 1 - k)) & 1 for k in range(width))


@dataclass(frozen=True)
class BitPresentation:
    """A presentation of ``source`` plus the code of each source position.

    ``binary`` uses ``ceil(log2 N)`` bits, most significant first, and surplus
    bit patterns alias the last position.  ``indicator`` uses one bit per
    position on a carrier of one-hot vectors.  ``single`` uses one coordinate
    whose value is the position.
    """

    source: DecisionProblem
    mode: str
    problem: DecisionProblem
    codes: tuple[State, ...]

    @property
    def width(self) -> int:
        return self.problem.dimension

    def encode(self, position: int) -> State:
        if not 0 <= position < self.source.size:
            raise DomainError(f"Position {position} is outside 0..{self.source.size - 1}")
        return self.codes[position]

    def decode(self, code: Sequence[int]) -> int:
        code = tuple(code)
        if self.mode == "indicator":
            if code not in self._index:
                raise DomainError(f"{code} is not a one-hot code")
            return self._index[code]
        return min(self.problem.space.index_of(code), self.source.size - 1)

    @cached_property
    def _index(self) -> dict[State, int]:
        return {c: p for p, c in enumerate(self.codes)}

    @cached_property
    def _labels(self) -> tuple[int, ...]:
        return quotient(self.source).class_of

    def sufficient(self, coords: Sequence[int]) -> bool:
        """Sufficiency of presentation coordinates, judged on genuine codes only."""
        coords = sorted(set(coords))
        if any(not 0 <= i < self.width for i in coords):
            raise DomainError(f"Coordinates {coords} are out of range for width {self.width}")
        return labels_sufficient(self.codes, self._labels, coords)

    def relevant(self, i: int) -> bool:
        return not self.sufficient([j for j in range(self.width) if j != i])


def present_as_bits(problem: DecisionProblem, mode: str = "binary", budget: int | None = None) -> BitPresentation:
    if mode not in PRESENTATION_MODES:
        raise DomainError(f"Unknown presentation mode {mode!r}; expected one of {PRESENTATION_MODES}")
    problem.check_budget(budget)
    n = problem.size
    if mode == "single":
        space = CoordinateSpace((n,))
        codes = tuple((p,) for p in range(n))
        presented = DecisionProblem(space, problem.actions, problem.utility)
    elif mode == "indicator":
        space = CoordinateSpace.binary(n)
        codes = tuple(tuple(int(k == p) for k in range(n)) for p in range(n))
        presented = DecisionProblem(space, problem.actions, problem.utility, codes)
    else:
        width = (n - 1).bit_length()
        space = CoordinateSpace.binary(width)
        codes = tuple(_bits(p, width) for p in range(n))
        rows = tuple(tuple(row[min(v, n - 1)] for v in range(space.size)) for row in problem.utility)
        presented = DecisionProblem(space, problem.actions, rows)
    return BitPresentation(problem, mode, presented, codes)
