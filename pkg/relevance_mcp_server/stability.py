"""Uniform perturbations of decision problems.

A strict optimizer with margin above twice the uniform distance survives the
perturbation, so a problem whose every state has such a margin keeps its
whole certification profile.  Without the margin nothing can be said: the
flip pairs below are arbitrarily close and still disagree.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    State,
    certification_profile,
    is_relevant,
    is_sufficient,
    quotient,
    to_fraction,
)
from relevance_mcp_server.helpers import DomainError, TheoryViolation

logger = logging.getLogger(__name__)

FLIP_KINDS = ("relevance", "sufficiency")


def _check_shape(d: DecisionProblem, e: DecisionProblem) -> None:
    if d.space != e.space or d.actions != e.actions or d.carrier != e.carrier:
        raise DomainError("Problems must share the space, the action list and the carrier")


def uniform_distance(d: DecisionProblem, e: DecisionProblem) -> Fraction:
    _check_shape(d, e)
    return max(
        (abs(u - v) for r, s in zip(d.utility, e.utility, strict=True) for u, v in zip(r, s, strict=True)),
        default=Fraction(0),
    )


# ---------------------------------------------------------------------------
# Gaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapProfile:
    """Strict gap per position; ``None`` marks a lone action with nothing to lose to."""

    gaps: tuple[Fraction | None, ...]

    @classmethod
    def of(cls, problem: DecisionProblem) -> GapProfile:
        gaps: list[Fraction | None] = []
        for pos in range(problem.size):
            values = sorted((row[pos] for row in problem.utility), reverse=True)
            if len(values) == 1:
                gaps.append(None)
            else:
                # a tie at the top gives 0
                gaps.append(values[0] - values[1])
        return cls(tuple(gaps))

    @property
    def min_gap(self) -> Fraction | None:
        return min((g for g in self.gaps if g is not None), default=None)

    def exceeds(self, position: int, bound: Fraction) -> bool:
        g = self.gaps[position]
        return g is None or g > bound


# ---------------------------------------------------------------------------
# Global certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityCertificate:
    verdict: str
    delta: Fraction
    min_gap: Fraction | None
    checked_profiles: bool

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def global_stability_certificate(
    d: DecisionProblem, e: DecisionProblem, *, check: bool = False, budget: int | None = None
) -> StabilityCertificate:
    """Certify that *e* has *d*'s profile when every gap of *d* exceeds twice their distance.

    A refusal makes no claim either way.
    """
    delta = uniform_distance(d, e)
    d.check_budget(budget)
    min_gap = GapProfile.of(d).min_gap
    if min_gap is not None and not min_gap > 2 * delta:
        logger.debug("refused: min_gap=%s delta=%s", min_gap, delta)
        return StabilityCertificate("refused", delta, min_gap, False)
    if check:
        p, q = certification_profile(d, budget=budget), certification_profile(e, budget=budget)
        same = (
            quotient(d).class_of == quotient(e).class_of
            and p.relevant == q.relevant
            and p.minimal_sufficient == q.minimal_sufficient
        )
        if not same:
            raise TheoryViolation(
                "certified perturbation changed the certification profile",
                witness={"delta": str(delta), "min_gap": str(min_gap)},
            )
    return StabilityCertificate("certified", delta, min_gap, check)


# ---------------------------------------------------------------------------
# Witness preservation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelevanceWitness:
    coordinate: int
    s: State
    t: State


@dataclass(frozen=True)
class NonSufficiencyWitness:
    coords: tuple[int, ...]
    s: State
    t: State


Witness = RelevanceWitness | NonSufficiencyWitness


def witness_failure(problem: DecisionProblem, witness: Witness) -> str | None:
    """The first clause *witness* fails in *problem*, or ``None`` when it is valid."""
    try:
        ps, pt = problem.position(witness.s), problem.position(witness.t)
    except DomainError as exc:
        return str(exc)
    os_, ot = problem.opt_at(ps), problem.opt_at(pt)
    if len(os_) != 1 or len(ot) != 1:
        return "optimizer sets at the witness states are not singletons"
    if os_ == ot:
        return "optimizer sets at the witness states are equal"
    d = problem.dimension
    if isinstance(witness, RelevanceWitness):
        if not 0 <= witness.coordinate < d:
            return f"coordinate {witness.coordinate} is out of range"
        if any(witness.s[j] != witness.t[j] for j in range(d) if j != witness.coordinate):
            return f"states differ off coordinate {witness.coordinate}"
        return None
    if any(not 0 <= i < d for i in witness.coords):
        return f"coordinates {list(witness.coords)} are out of range"
    if any(witness.s[i] != witness.t[i] for i in witness.coords):
        return f"states differ on {list(witness.coords)}"
    return None


def witness_preservation(
    d: DecisionProblem, e: DecisionProblem, witness: Witness, *, check: bool = False
) -> bool:
    """True when both witness states have strict gaps above twice the distance; otherwise no claim."""
    failure = witness_failure(d, witness)
    if failure is not None:
        raise DomainError(f"Witness is not valid in the base problem: {failure}")
    bound = 2 * uniform_distance(d, e)
    gaps = GapProfile.of(d)
    if not (gaps.exceeds(d.position(witness.s), bound) and gaps.exceeds(d.position(witness.t), bound)):
        return False
    if check:
        failure = witness_failure(e, witness)
        if failure is not None:
            raise TheoryViolation(f"preserved witness fails in the perturbed problem: {failure}")
    return True


# ---------------------------------------------------------------------------
# Flip pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlipPair:
    kind: str
    epsilon: Fraction
    tracking: DecisionProblem
    tied: DecisionProblem


def make_flip_pair(epsilon: Any, kind: str = "relevance") -> FlipPair:
    """One Boolean coordinate: the optimizer tracks it in one problem and all actions tie in the other."""
    eps = to_fraction(epsilon)
    if eps <= 0:
        raise DomainError(f"epsilon must be positive, got {eps}")
    if kind not in FLIP_KINDS:
        raise DomainError(f"Unknown flip kind {kind!r}; expected one of {FLIP_KINDS}")
    space = CoordinateSpace.binary(1)
    half = eps / 2
    tracking = DecisionProblem(space, ("a", "b"), ((Fraction(0), half), (half, Fraction(0))))
    tied = DecisionProblem(space, ("a", "b"), ((Fraction(0),) * 2,) * 2)
    return FlipPair(kind, eps, tracking, tied)


def verify_flip(pair: FlipPair) -> bool:
    if uniform_distance(pair.tracking, pair.tied) > pair.epsilon:
        return False
    if pair.kind == "relevance":
        return is_relevant(pair.tracking, 0) and not is_relevant(pair.tied, 0)
    return not is_sufficient(pair.tracking, ()) and is_sufficient(pair.tied, ())


def profile_difference(d: DecisionProblem, e: DecisionProblem) -> dict[str, Sequence[int]]:
    """Relevant sets of both problems when they differ, else empty."""
    p, q = certification_profile(d), certification_profile(e)
    if p.relevant == q.relevant:
        return {}
    return {"base": sorted(p.relevant), "perturbed": sorted(q.relevant)}
