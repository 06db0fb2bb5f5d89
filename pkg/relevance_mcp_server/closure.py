"""Closure steps, their transports, trace application and invariance verification.

Six presentation moves preserve exact certification: action relabeling,
coordinate relabeling, positive affine reparameterization, action
duplication, state duplication, and extension by an irrelevant binary
coordinate.  Each step works on a :class:`DecisionProblem` (abstract tier)
and, except state duplication, on a :class:`PairwiseSlice`.  Every
application returns the transformed object together with a materialized
:class:`StepTransport`.
"""

from __future__ import annotations

import itertools
import logging
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Any, ClassVar

from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    State,
    labels_sufficient,
    quotient,
    to_fraction,
)
from relevance_mcp_server.helpers import (
    SEED,
    Check,
    CheckReport,
    DomainError,
    TraceStepError,
    UnsupportedStepError,
    resolve_subset_cap,
)
from relevance_mcp_server.pairwise import ActionCoefficients, PairwiseSlice

logger = logging.getLogger(__name__)

Representation = DecisionProblem | PairwiseSlice

SUBSET_SAMPLES = 64


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepTransport:
    """Coordinate ``i`` moves to ``coord_map[i]``; coordinates outside the image are new."""

    coord_map: tuple[int, ...]
    new_dimension: int
    action_map: tuple[tuple[str, str], ...]

    @classmethod
    def identity(cls, d: int, actions: Sequence[str]) -> StepTransport:
        return cls(tuple(range(d)), d, tuple((a, a) for a in actions))

    def coords(self, subset: Iterable[int]) -> frozenset[int]:
        return frozenset(self.coord_map[i] for i in subset)

    def state(self, x: Sequence[int]) -> State:
        y = [0] * self.new_dimension
        for i, v in enumerate(x):
            y[self.coord_map[i]] = v
        return tuple(y)

    def action(self, a: str) -> str:
        return dict(self.action_map)[a]

    def new_coordinates(self) -> list[int]:
        image = set(self.coord_map)
        return [j for j in range(self.new_dimension) if j not in image]

    def then(self, nxt: StepTransport) -> StepTransport:
        follow = dict(nxt.action_map)
        return StepTransport(
            tuple(nxt.coord_map[c] for c in self.coord_map),
            nxt.new_dimension,
            tuple((a, follow[b]) for a, b in self.action_map),
        )


def _identity(obj: Representation) -> StepTransport:
    return StepTransport.identity(_dimension(obj), obj.actions)


def _dimension(obj: Representation) -> int:
    return obj.d if isinstance(obj, PairwiseSlice) else obj.dimension


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


class ClosureStep:
    op: ClassVar[str] = ""

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        raise UnsupportedStepError(f"{self.op} is not available on the abstract problem tier")

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        raise UnsupportedStepError(f"{self.op} is not available on the slice tier")


@dataclass(frozen=True)
class TableTerm:
    """Statewise term, one value per state position."""

    values: tuple[Fraction, ...]


@dataclass(frozen=True)
class RelabelActions(ClosureStep):
    op: ClassVar[str] = "relabel_actions"
    mapping: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> RelabelActions:
        return cls(tuple(mapping.items()))

    def _renamed(self, actions: Sequence[str]) -> tuple[str, ...]:
        m = dict(self.mapping)
        if set(m) != set(actions) or len(m) != len(self.mapping):
            raise DomainError(f"Relabeling must name every action exactly once: {sorted(m)} vs {list(actions)}")
        new = tuple(m[a] for a in actions)
        if len(set(new)) != len(new) or not all(isinstance(a, str) and a for a in new):
            raise DomainError(f"Relabeling is not a bijection onto distinct identifiers: {list(new)}")
        return new

    def _transport(self, d: int, actions: Sequence[str], new: Sequence[str]) -> StepTransport:
        return StepTransport(tuple(range(d)), d, tuple(zip(actions, new, strict=True)))

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        new = self._renamed(problem.actions)
        out = DecisionProblem(problem.space, new, problem.utility, problem.carrier)
        return out, self._transport(problem.dimension, problem.actions, new)

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        new = self._renamed(slc.actions)
        return PairwiseSlice(slc.d, new, slc.coeffs), self._transport(slc.d, slc.actions, new)


@dataclass(frozen=True)
class RelabelCoords(ClosureStep):
    op: ClassVar[str] = "relabel_coords"
    permutation: tuple[int, ...]

    def _check(self, d: int) -> None:
        if sorted(self.permutation) != list(range(d)):
            raise DomainError(f"{list(self.permutation)} is not a permutation of 0..{d - 1}")

    def _transport(self, d: int, actions: Sequence[str]) -> StepTransport:
        return StepTransport(tuple(self.permutation), d, tuple((a, a) for a in actions))

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        d = problem.dimension
        self._check(d)
        t = self._transport(d, problem.actions)
        domains = [0] * d
        for i, k in enumerate(problem.space.domains):
            domains[self.permutation[i]] = k
        space = CoordinateSpace(tuple(domains))
        if problem.carrier is not None:
            carrier = tuple(t.state(x) for x in problem.carrier)
            return DecisionProblem(space, problem.actions, problem.utility, carrier), t
        order = [space.index_of(t.state(x)) for x in problem.states]
        rows = []
        for row in problem.utility:
            new_row: list[Fraction] = [Fraction(0)] * len(row)
            for pos, v in zip(order, row, strict=True):
                new_row[pos] = v
            rows.append(tuple(new_row))
        return DecisionProblem(space, problem.actions, tuple(rows)), t

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        self._check(slc.d)
        coeffs = tuple(c.permuted(self.permutation) for c in slc.coeffs)
        return PairwiseSlice(slc.d, slc.actions, coeffs), self._transport(slc.d, slc.actions)


@dataclass(frozen=True)
class Affine(ClosureStep):
    """``V(a, s) = alpha(s) + beta(s) * U(a, s)`` with ``beta > 0``."""

    op: ClassVar[str] = "affine"
    alpha: TableTerm | ActionCoefficients
    beta: Fraction | tuple[Fraction, ...] = Fraction(1)

    def __post_init__(self) -> None:
        if isinstance(self.beta, tuple | list):
            beta: Fraction | tuple[Fraction, ...] = tuple(to_fraction(b) for b in self.beta)
            betas = beta
        else:
            beta = to_fraction(self.beta)
            betas = (beta,)
        for b in betas:
            if b <= 0:
                raise DomainError(f"Affine beta must be positive, got {b}")
        object.__setattr__(self, "beta", beta)

    def _statewise(self, problem: DecisionProblem) -> tuple[list[Fraction], list[Fraction]]:
        n = problem.size
        if isinstance(self.alpha, TableTerm):
            if len(self.alpha.values) != n:
                raise DomainError(f"Affine alpha has {len(self.alpha.values)} values, expected {n}")
            alpha = list(self.alpha.values)
        else:
            if not problem.space.is_binary or self.alpha.dimension != problem.dimension:
                raise DomainError("A pairwise alpha needs a binary space of the same dimension")
            alpha = [self.alpha.evaluate(s) for s in problem.states]
        if isinstance(self.beta, tuple):
            if len(self.beta) != n:
                raise DomainError(f"Affine beta has {len(self.beta)} values, expected {n}")
            beta = list(self.beta)
        else:
            beta = [self.beta] * n
        return alpha, beta

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        alpha, beta = self._statewise(problem)
        rows = tuple(
            tuple(al + be * v for al, be, v in zip(alpha, beta, row, strict=True)) for row in problem.utility
        )
        return DecisionProblem(problem.space, problem.actions, rows, problem.carrier), _identity(problem)

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        if not isinstance(self.alpha, ActionCoefficients):
            raise UnsupportedStepError("On the slice tier affine alpha must be a pairwise coefficient term")
        if isinstance(self.beta, tuple):
            raise UnsupportedStepError("On the slice tier affine beta must be a single positive constant")
        if self.alpha.dimension != slc.d:
            raise DomainError(f"Affine alpha has dimension {self.alpha.dimension}, slice has {slc.d}")
        coeffs = tuple(self.alpha.plus(c.scaled(self.beta)) for c in slc.coeffs)
        return PairwiseSlice(slc.d, slc.actions, coeffs), _identity(slc)


def fresh_action_id(source: str, taken: Iterable[str]) -> str:
    used = set(taken)
    k = 1
    while f"{source}~{k}" in used:
        k += 1
    return f"{source}~{k}"


@dataclass(frozen=True)
class DuplicateAction(ClosureStep):
    op: ClassVar[str] = "duplicate_action"
    source: str
    new_id: str | None = None

    def _new_id(self, actions: Sequence[str]) -> str:
        if self.source not in actions:
            raise DomainError(f"Cannot duplicate unknown action {self.source!r}")
        if self.new_id is None:
            return fresh_action_id(self.source, actions)
        if self.new_id in actions or not self.new_id:
            raise DomainError(f"Duplicate id {self.new_id!r} is not fresh")
        return self.new_id

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        new = self._new_id(problem.actions)
        rows = (*problem.utility, problem.row(self.source))
        return DecisionProblem(problem.space, (*problem.actions, new), rows, problem.carrier), _identity(problem)

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        new = self._new_id(slc.actions)
        out = PairwiseSlice(slc.d, (*slc.actions, new), (*slc.coeffs, slc.coefficients(self.source)))
        return out, _identity(slc)


@dataclass(frozen=True)
class DuplicateState(ClosureStep):
    """Append a copy of *source* to the carrier; only meaningful on the abstract tier."""

    op: ClassVar[str] = "duplicate_state"
    source: State

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        pos = problem.position(self.source)
        carrier = (*problem.states, problem.states[pos])
        rows = tuple((*row, row[pos]) for row in problem.utility)
        return DecisionProblem(problem.space, problem.actions, rows, carrier), _identity(problem)

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        raise UnsupportedStepError(
            "duplicate_state leaves the binary cube; apply it to the abstract problem tier instead"
        )


@dataclass(frozen=True)
class ExtendIrrelevant(ClosureStep):
    """Append one binary coordinate that never affects utility."""

    op: ClassVar[str] = "extend_irrelevant"

    def _transport(self, d: int, actions: Sequence[str]) -> StepTransport:
        return StepTransport(tuple(range(d)), d + 1, tuple((a, a) for a in actions))

    def apply_to_problem(self, problem: DecisionProblem) -> tuple[DecisionProblem, StepTransport]:
        space = CoordinateSpace((*problem.space.domains, 2))
        rows = tuple(tuple(v for v in row for _ in (0, 1)) for row in problem.utility)
        carrier = None
        if problem.carrier is not None:
            carrier = tuple((*s, b) for s in problem.carrier for b in (0, 1))
        out = DecisionProblem(space, problem.actions, rows, carrier)
        return out, self._transport(problem.dimension, problem.actions)

    def apply_to_slice(self, slc: PairwiseSlice) -> tuple[PairwiseSlice, StepTransport]:
        coeffs = tuple(c.extended() for c in slc.coeffs)
        return PairwiseSlice(slc.d + 1, slc.actions, coeffs), self._transport(slc.d, slc.actions)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosureTrace:
    steps: tuple[ClosureStep, ...]
    transports: tuple[StepTransport, ...]
    base_dimension: int
    base_actions: tuple[str, ...]

    @property
    def cumulative(self) -> StepTransport:
        start = StepTransport.identity(self.base_dimension, self.base_actions)
        return reduce(StepTransport.then, self.transports, start)


def apply_step(obj: Any, step: ClosureStep) -> tuple[Any, StepTransport]:
    if isinstance(obj, PairwiseSlice):
        return step.apply_to_slice(obj)
    if isinstance(obj, DecisionProblem):
        return step.apply_to_problem(obj)
    raise TypeError(f"Closure steps apply to problems or slices, not {type(obj).__name__}")


def apply_trace(base: Any, steps: Sequence[ClosureStep]) -> tuple[Any, ClosureTrace]:
    """Apply *steps* left to right; the first invalid step aborts with its index."""
    current = base
    transports = []
    for k, step in enumerate(steps):
        try:
            current, t = apply_step(current, step)
        except (ValueError, TypeError) as exc:
            raise TraceStepError(k, exc) from exc
        transports.append(t)
    trace = ClosureTrace(tuple(steps), tuple(transports), _dimension(base), tuple(base.actions))
    return current, trace


# ---------------------------------------------------------------------------
# Invariance verification
# ---------------------------------------------------------------------------


def _as_problem(obj: Any, budget: int | None) -> DecisionProblem:
    if isinstance(obj, PairwiseSlice):
        return obj.to_problem(budget)
    obj.check_budget(budget)
    return obj


def _subsets(d: int, cap: int, seed: int) -> Iterable[tuple[int, ...]]:
    if d <= cap:
        return itertools.chain.from_iterable(itertools.combinations(range(d), r) for r in range(d + 1))
    rng = random.Random(seed)
    picks = {(), tuple(range(d))}
    target = min(SUBSET_SAMPLES + 2, 2**d)
    while len(picks) < target:
        picks.add(tuple(i for i in range(d) if rng.random() < 0.5))
    return sorted(picks)


def _position_map(step: ClosureStep, before: DecisionProblem, after: DecisionProblem, t: StepTransport) -> list[int]:
    if isinstance(step, ExtendIrrelevant):
        return [2 * pos for pos in range(before.size)]
    if after.carrier is None:
        return [after.space.index_of(t.state(x)) for x in before.states]
    # carrier steps keep positions (duplicate_state appends)
    return list(range(before.size))


def _optimizer_transport_check(
    k: int, step: ClosureStep, before: DecisionProblem, after: DecisionProblem, t: StepTransport
) -> list[Check]:
    actions = dict(t.action_map)
    image = set(actions.values())
    where = _position_map(step, before, after, t)
    for pos, x in enumerate(before.states):
        got = after.opt_at(where[pos]) & image
        want = frozenset(actions[a] for a in before.opt_at(pos))
        if got != want:
            return [Check(f"step{k}:{step.op}:optimizer_transport", False, {"state": list(x)})]
    checks = [Check(f"step{k}:{step.op}:optimizer_transport", True)]
    if isinstance(step, DuplicateAction):
        new = after.actions[-1]
        bad = next(
            (
                x
                for pos, x in enumerate(before.states)
                if (new in after.opt_at(pos)) != (step.source in before.opt_at(pos))
            ),
            None,
        )
        detail = {} if bad is None else {"state": list(bad)}
        checks.append(Check(f"step{k}:duplicate_optimality", bad is None, detail))
    return checks


def verify_invariance(
    base: Any,
    trace: ClosureTrace,
    result: Any = None,
    *,
    subset_cap: int | None = None,
    budget: int | None = None,
    seed: int | None = None,
) -> CheckReport:
    """Brute-force evidence that *trace* preserves the exact-certification problem.

    *result* is the claimed outcome (defaults to the replayed one).  Checks:
    replay of every step and transport, sufficiency of every base coordinate
    set against its transport (sampled above *subset_cap*), relevance of every
    base coordinate, irrelevance of every new coordinate, and per step the
    transport of optimizer sets (state-by-state equality for affine steps).
    """
    checks: list[Check] = []
    objs = [base]
    transports: list[StepTransport] = []
    try:
        for k, step in enumerate(trace.steps):
            try:
                nxt, t = apply_step(objs[-1], step)
            except (ValueError, TypeError) as exc:
                raise TraceStepError(k, exc) from exc
            objs.append(nxt)
            transports.append(t)
    except TraceStepError as exc:
        checks.append(Check("replay", False, {"step": exc.index, "error": str(exc.cause)}))
        return CheckReport(tuple(checks))

    final = objs[-1] if result is None else result
    detail: dict[str, Any] = {}
    if objs[-1] != final:
        detail["result"] = "replayed object differs from the recorded result"
    if tuple(transports) != trace.transports:
        detail["transports"] = "replayed transports differ from the recorded ones"
    checks.append(Check("replay", not detail, detail))

    problems = [_as_problem(o, budget) for o in objs]
    for k, step in enumerate(trace.steps):
        checks.extend(_optimizer_transport_check(k, step, problems[k], problems[k + 1], transports[k]))

    p0, pn = problems[0], _as_problem(final, budget)
    cum = trace.cumulative
    if pn.dimension != cum.new_dimension:
        checks.append(Check("dimension", False, {"expected": cum.new_dimension, "got": pn.dimension}))
        return CheckReport(tuple(checks))
    l0, ln = quotient(p0).class_of, quotient(pn).class_of
    cap = resolve_subset_cap(subset_cap)

    mismatch = None
    for subset in _subsets(p0.dimension, cap, SEED if seed is None else seed):
        image = sorted(cum.coords(subset))
        if labels_sufficient(p0.states, l0, subset) != labels_sufficient(pn.states, ln, image):
            mismatch = {"subset": list(subset), "transported": image}
            break
    checks.append(Check("sufficiency_transport", mismatch is None, mismatch or {}))

    def relevant(p: DecisionProblem, labels: Sequence[int], i: int) -> bool:
        return not labels_sufficient(p.states, labels, [j for j in range(p.dimension) if j != i])

    bad = [i for i in range(p0.dimension) if relevant(p0, l0, i) != relevant(pn, ln, cum.coord_map[i])]
    checks.append(Check("relevance_transport", not bad, {"coordinates": bad} if bad else {}))
    noisy = [j for j in cum.new_coordinates() if relevant(pn, ln, j)]
    checks.append(Check("new_coordinates_irrelevant", not noisy, {"coordinates": noisy} if noisy else {}))
    report = CheckReport(tuple(checks))
    logger.debug("invariance over %d steps: passed=%s", len(trace.steps), report.passed)
    return report
