"""Orbit-gap witnesses, the classifier falsifier, and hull algebra on finite universes.

An orbit-gap witness is a slice, a closure trace, and the translated slice,
where the trace provably preserves exact certification yet a target
predicate changes its verdict.  Such a pair shows the predicate cannot be a
closure-invariant characterization of anything certification depends on.

The four built-in families place the base and translate on opposite sides of
the four target predicates.  Apart from the dominant-pair family, their
coefficients are this package's own choice; ``fixtures/bundles`` locks them.
"""

from __future__ import annotations

import logging
import random
import time
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, replace
from fractions import Fraction
from math import comb

import networkx as nx

from relevance_mcp_server.closure import (
    Affine,
    ClosureStep,
    ClosureTrace,
    DuplicateAction,
    ExtendIrrelevant,
    RelabelActions,
    RelabelCoords,
    apply_step,
    apply_trace,
    verify_invariance,
)
from relevance_mcp_server.decision import certification_profile
from relevance_mcp_server.generators import random_slice
from relevance_mcp_server.helpers import Check, CheckReport, DomainError, TheoryViolation
from relevance_mcp_server.pairwise import TARGET_KINDS, ActionCoefficients, PairwiseSlice, product_term, target_predicate
from relevance_mcp_server.patterns import PatternScheme, evaluate_scheme

logger = logging.getLogger(__name__)

FAMILY_KINDS = TARGET_KINDS
SCHEME_KIND = "scheme"


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


def _all_pairs(n: int) -> dict[tuple[int, int], object]:
    return {(i, j): product_term(1) for i in range(n) for j in range(i + 1, n)}


def _pair_term(n: int, i: int, j: int, scale: int) -> ActionCoefficients:
    return ActionCoefficients.build(n, 0, None, {(i, j): product_term(scale)})


def family_base(kind: str, n: int) -> tuple[PairwiseSlice, ActionCoefficients]:
    """Base slice of a family and the action-independent pair term that translates it."""
    if kind not in FAMILY_KINDS:
        raise DomainError(f"Unknown family {kind!r}; expected one of {FAMILY_KINDS}")
    if n < 3:
        raise DomainError(f"Families need n >= 3, got {n}")
    zero = ActionCoefficients.zero(n)
    if kind == "dominant_pair":
        a = _pair_term(n, 0, 1, 2)
        return PairwiseSlice(n, ("a", "b"), (a, zero)), _pair_term(n, 1, 2, 3)
    if kind == "margin_bounded":
        # unary margin on x0 outweighs every pair interaction combined
        m = comb(n, 2) + 1
        a = ActionCoefficients.build(n, 0, {0: (-m, m)}, _all_pairs(n))
        return PairwiseSlice(n, ("a", "b"), (a, zero)), _pair_term(n, 1, 2, m)
    if kind == "ghost_action":
        a = ActionCoefficients.build(n, 0, {0: (0, 2)})
        b = ActionCoefficients.build(n, 1)
        g = ActionCoefficients.build(n, -(comb(n, 2) + 2), {0: (-1, -1)}, _all_pairs(n))
        return PairwiseSlice(n, ("a", "b", "g"), (a, b, g)), _pair_term(n, 0, 1, 1)
    a = ActionCoefficients.build(n, 1, None, _all_pairs(n))
    return PairwiseSlice(n, ("a", "b"), (a, zero)), _pair_term(n, 0, 1, 1)


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessBundle:
    kind: str
    base: PairwiseSlice
    trace: ClosureTrace
    translated: PairwiseSlice
    scheme: PatternScheme | None = None
    report: CheckReport | None = None


def _evaluator(kind: str, scheme: PatternScheme | None) -> Callable[[PairwiseSlice], bool]:
    if kind == SCHEME_KIND:
        if scheme is None:
            raise DomainError("A scheme bundle must carry its scheme")
        return lambda s: evaluate_scheme(scheme, s)
    if kind not in TARGET_KINDS:
        raise DomainError(f"Unknown target {kind!r}")
    return lambda s: target_predicate(s, kind)


def make_family(
    kind: str, n: int, *, budget: int | None = None, subset_cap: int | None = None
) -> WitnessBundle:
    base, alpha = family_base(kind, n)
    translated, trace = apply_trace(base, [Affine(alpha, Fraction(1))])
    bundle = WitnessBundle(kind, base, trace, translated)
    report = verify_bundle(bundle, budget=budget, subset_cap=subset_cap)
    if not report.passed:
        raise TheoryViolation(f"{kind} family at n={n} failed its own verification", witness=report.to_dict())
    logger.info("Built %s witness at n=%d", kind, n)
    return replace(bundle, report=report)


def verify_bundle(
    bundle: WitnessBundle, *, budget: int | None = None, subset_cap: int | None = None
) -> CheckReport:
    """Re-check replay, predicate flip and certification equality, each separately."""
    inv = verify_invariance(bundle.base, bundle.trace, bundle.translated, subset_cap=subset_cap, budget=budget)
    replay = inv.get("replay")
    checks = [Check("trace_replay", replay.passed, replay.detail)]

    try:
        evaluate = _evaluator(bundle.kind, bundle.scheme)
        before, after = evaluate(bundle.base), evaluate(bundle.translated)
        checks.append(Check("predicate_flip", before != after, {"base": before, "translated": after}))
    except (ValueError, TypeError) as exc:
        checks.append(Check("predicate_flip", False, {"error": str(exc)}))

    detail: dict[str, object] = {}
    try:
        p0 = certification_profile(bundle.base.to_problem(budget))
        p1 = certification_profile(bundle.translated.to_problem(budget))
        moved = bundle.trace.cumulative.coords(p0.relevant)
        if moved != p1.relevant or p0.quotient_count != p1.quotient_count:
            detail["profiles"] = {
                "base_relevant": sorted(p0.relevant),
                "translated_relevant": sorted(p1.relevant),
                "base_m": p0.quotient_count,
                "translated_m": p1.quotient_count,
            }
    except (KeyError, IndexError) as exc:
        detail["transport"] = f"recorded transports are malformed: {exc}"
    failed = [c.name for c in inv.checks if c.name != "replay" and not c.passed]
    if failed:
        detail["invariance"] = failed
    checks.append(Check("certification", not detail, detail))
    return CheckReport(tuple(checks))


# ---------------------------------------------------------------------------
# Falsifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    dims: tuple[int, ...] = (3, 4)
    random_bases: int = 40
    random_actions: tuple[int, ...] = (2, 3)
    scales: tuple[int, ...] = (1, 2, 3, -1)
    max_candidates: int = 20_000
    time_limit_s: float = 60.0
    seed: int = 0


@dataclass(frozen=True)
class SearchStats:
    bases: int
    candidates: int
    elapsed_s: float
    stopped: str


@dataclass(frozen=True)
class FalsifyResult:
    bundle: WitnessBundle | None
    stats: SearchStats


def _bases(config: SearchConfig) -> Iterator[PairwiseSlice]:
    for n in config.dims:
        for kind in FAMILY_KINDS:
            yield family_base(kind, n)[0]
    rng = random.Random(config.seed)
    for _ in range(config.random_bases):
        yield random_slice(rng, rng.choice(config.dims), rng.choice(config.random_actions))


def _moves(slc: PairwiseSlice, scales: Sequence[int]) -> Iterator[ClosureStep]:
    """Pair-targeted affine steps first, then the discrete closure moves."""
    for i in range(slc.d):
        for j in range(i + 1, slc.d):
            for s in scales:
                yield Affine(_pair_term(slc.d, i, j, s), Fraction(1))
    for t in range(slc.d - 1):
        perm = list(range(slc.d))
        perm[t], perm[t + 1] = perm[t + 1], perm[t]
        yield RelabelCoords(tuple(perm))
    if len(slc.actions) > 1:
        yield RelabelActions(tuple(zip(slc.actions, reversed(slc.actions), strict=True)))
    for a in slc.actions:
        yield DuplicateAction(a)
    yield ExtendIrrelevant()


def falsify_classifier(target: str | PatternScheme, config: SearchConfig | None = None) -> FalsifyResult:
    """Search for a same-orbit disagreement of *target*; ``None`` never claims invariance."""
    config = config or SearchConfig()
    kind, scheme = (SCHEME_KIND, target) if isinstance(target, PatternScheme) else (target, None)
    evaluate = _evaluator(kind, scheme)
    start = time.monotonic()
    bases = candidates = 0

    def stats(stopped: str) -> SearchStats:
        return SearchStats(bases, candidates, round(time.monotonic() - start, 3), stopped)

    for base in _bases(config):
        try:
            before = evaluate(base)
        except DomainError:
            continue
        bases += 1
        for step in _moves(base, config.scales):
            if candidates >= config.max_candidates:
                logger.info("Falsifier hit the candidate limit after %d candidates", candidates)
                return FalsifyResult(None, stats("candidate_limit"))
            if time.monotonic() - start > config.time_limit_s:
                logger.info("Falsifier hit the time limit after %d candidates", candidates)
                return FalsifyResult(None, stats("time_limit"))
            candidates += 1
            translated, trace = apply_trace(base, [step])
            try:
                after = evaluate(translated)
            except DomainError:
                continue
            if before == after:
                continue
            bundle = WitnessBundle(kind, base, trace, translated, scheme)
            report = verify_bundle(bundle)
            if report.passed:
                logger.info("Falsifier found a %s witness after %d candidates", step.op, candidates)
                return FalsifyResult(replace(bundle, report=report), stats("found"))
            logger.warning("Candidate %d flipped but failed verification: %s", candidates, report.to_dict())
    logger.info("Falsifier exhausted %d bases and %d candidates", bases, candidates)
    return FalsifyResult(None, stats("exhausted"))


# ---------------------------------------------------------------------------
# Finite universes and hulls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniverseEdge:
    source: int
    target: int
    step: ClosureStep


@dataclass(frozen=True)
class FiniteUniverse:
    members: tuple[PairwiseSlice, ...]
    edges: tuple[UniverseEdge, ...]

    @classmethod
    def from_edges(cls, members: Sequence[PairwiseSlice], edges: Iterable[UniverseEdge]) -> FiniteUniverse:
        """Keep user edges, replaying each step to confirm it lands on its target."""
        members = tuple(members)
        checked = []
        for e in edges:
            if not (0 <= e.source < len(members) and 0 <= e.target < len(members)):
                raise DomainError(f"Edge {e.source}->{e.target} leaves the universe")
            try:
                got, _ = apply_step(members[e.source], e.step)
            except (ValueError, TypeError) as exc:
                raise DomainError(f"Edge {e.source}->{e.target}: {exc}") from exc
            if got != members[e.target]:
                raise DomainError(f"Edge {e.source}->{e.target}: {e.step.op} does not reach the target")
            checked.append(e)
        return cls(members, tuple(checked))

    @classmethod
    def build(cls, members: Sequence[PairwiseSlice], generators: Sequence[ClosureStep]) -> FiniteUniverse:
        members = tuple(members)
        edges = []
        for i, m in enumerate(members):
            for step in generators:
                try:
                    got, _ = apply_step(m, step)
                except (ValueError, TypeError):
                    continue
                edges.extend(UniverseEdge(i, j, step) for j, other in enumerate(members) if other == got)
        return cls(members, tuple(edges))

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.members)))
        g.add_edges_from((e.source, e.target) for e in self.edges)
        return g

    def classes(self) -> list[frozenset[int]]:
        return sorted((frozenset(c) for c in nx.connected_components(self.graph())), key=min)

    def restrict(self, domain: Iterable[int]) -> tuple[FiniteUniverse, tuple[int, ...]]:
        """Sub-universe on *domain*, with the original index of each kept member.

        The domain must be closure-closed: no recorded edge may cross its boundary.
        """
        keep = tuple(sorted(self._check(domain)))
        if not keep:
            raise DomainError("A restricted domain needs at least one member")
        inside = set(keep)
        crossing = [(e.source, e.target) for e in self.edges if (e.source in inside) != (e.target in inside)]
        if crossing:
            raise DomainError(f"Domain is not closure-closed: edges {crossing} cross its boundary")
        renumber = {old: new for new, old in enumerate(keep)}
        edges = tuple(
            UniverseEdge(renumber[e.source], renumber[e.target], e.step) for e in self.edges if e.source in inside
        )
        return FiniteUniverse(tuple(self.members[i] for i in keep), edges), keep

    def _check(self, q: Iterable[int]) -> frozenset[int]:
        q = frozenset(q)
        outside = sorted(i for i in q if not 0 <= i < len(self.members))
        if outside:
            raise DomainError(f"Indices {outside} are not members of the universe")
        return q


def hull(universe: FiniteUniverse, q: Iterable[int]) -> frozenset[int]:
    """Every member reachable from a member of *q*."""
    q = universe._check(q)
    return frozenset().union(*(c for c in universe.classes() if c & q))


@dataclass(frozen=True)
class SeparationResult:
    verdict: str
    classifier: frozenset[int] | None = None
    witness: tuple[int, int] | None = None
    path: tuple[int, ...] = ()


def hull_separation(universe: FiniteUniverse, q: Iterable[int]) -> SeparationResult:
    q = universe._check(q)
    rest = frozenset(range(len(universe.members))) - q
    positive, negative = hull(universe, q), hull(universe, rest)
    if not positive & negative:
        return SeparationResult("classifiable", classifier=positive)
    for cls in universe.classes():
        inside, outside = cls & q, cls - q
        if inside and outside:
            i, j = min(inside), min(outside)
            path = tuple(nx.shortest_path(universe.graph(), i, j))
            return SeparationResult("orbit_gap", witness=(i, j), path=path)
    raise TheoryViolation("hulls overlap but no reachability class is mixed")  # pragma: no cover
