"""Seeded random generators for slices, problems, labelings and closure traces.

Every generator takes an explicit ``random.Random`` so callers control the
seed; the falsifier and the property tests share them.
"""

from __future__ import annotations

import random
from collections.abc import Sequence
from fractions import Fraction

from relevance_mcp_server.closure import (
    Affine,
    ClosureStep,
    DuplicateAction,
    DuplicateState,
    ExtendIrrelevant,
    RelabelActions,
    RelabelCoords,
    TableTerm,
    apply_step,
)
from relevance_mcp_server.decision import CoordinateSpace, DecisionProblem
from relevance_mcp_server.pairwise import ActionCoefficients, PairTable, PairwiseSlice, product_term
from relevance_mcp_server.realize import Labeling

_NAMES = "abcdefgh"


def action_names(n: int) -> tuple[str, ...]:
    if n <= len(_NAMES):
        return tuple(_NAMES[:n])
    return tuple(f"a{k}" for k in range(n))


def random_rational(rng: random.Random, magnitude: int = 3, denominators: Sequence[int] = (1, 2)) -> Fraction:
    q = rng.choice(denominators)
    return Fraction(rng.randint(-magnitude * q, magnitude * q), q)


def random_coefficients(
    rng: random.Random,
    d: int,
    *,
    magnitude: int = 3,
    unary_density: float = 0.6,
    pair_density: float = 0.4,
) -> ActionCoefficients:
    unary = {
        i: (random_rational(rng, magnitude), random_rational(rng, magnitude))
        for i in range(d)
        if rng.random() < unary_density
    }
    pairs = {}
    for i in range(d):
        for j in range(i + 1, d):
            if rng.random() < pair_density:
                pairs[(i, j)] = [[random_rational(rng, magnitude) for _ in range(2)] for _ in range(2)]
    return ActionCoefficients.build(d, random_rational(rng, magnitude), unary, pairs)


def random_slice(
    rng: random.Random,
    d: int,
    n_actions: int = 2,
    *,
    magnitude: int = 3,
    unary_density: float = 0.6,
    pair_density: float = 0.4,
) -> PairwiseSlice:
    actions = action_names(n_actions)
    coeffs = tuple(
        random_coefficients(
            rng, d, magnitude=magnitude, unary_density=unary_density, pair_density=pair_density
        )
        for _ in actions
    )
    return PairwiseSlice(d, actions, coeffs)


def random_symmetric_slice(rng: random.Random, d: int, n_actions: int = 2, magnitude: int = 3) -> PairwiseSlice:
    """Per action: one unary table on every coordinate and one symmetric pair table on every pair."""
    coeffs = []
    for _ in range(n_actions):
        u = (random_rational(rng, magnitude), random_rational(rng, magnitude))
        off = random_rational(rng, magnitude)
        w: PairTable = ((random_rational(rng, magnitude), off), (off, random_rational(rng, magnitude)))
        if rng.random() < 0.3:
            w = ((Fraction(0), Fraction(0)), (Fraction(0), Fraction(0)))
        pairs = {(i, j): w for i in range(d) for j in range(i + 1, d)}
        coeffs.append(ActionCoefficients.build(d, random_rational(rng, magnitude), [u] * d, pairs))
    return PairwiseSlice(d, action_names(n_actions), tuple(coeffs))


def random_problem(
    rng: random.Random, domains: Sequence[int], n_actions: int = 2, magnitude: int = 2
) -> DecisionProblem:
    """Small integer utilities, so ties and coarse quotients are common."""
    space = CoordinateSpace(tuple(domains))
    return DecisionProblem.from_function(
        space, action_names(n_actions), lambda _a, _s: rng.randint(-magnitude, magnitude)
    )


def random_gapped_problem(
    rng: random.Random, domains: Sequence[int], n_actions: int = 2, gap: int = 5
) -> DecisionProblem:
    """Every state has a unique optimizer with margin at least *gap*."""
    space = CoordinateSpace(tuple(domains))
    actions = action_names(n_actions)
    rows: list[list[Fraction]] = [[] for _ in actions]
    for _ in range(space.size):
        levels = rng.sample(range(-n_actions, n_actions + 1), n_actions)
        for row, level in zip(rows, levels, strict=True):
            row.append(Fraction(gap * level))
    return DecisionProblem(space, actions, tuple(tuple(r) for r in rows))


def random_perturbation(rng: random.Random, problem: DecisionProblem, delta: Fraction) -> DecisionProblem:
    """Move every utility by at most *delta*."""
    rows = tuple(tuple(v + delta * Fraction(rng.randint(-4, 4), 4) for v in row) for row in problem.utility)
    return DecisionProblem(problem.space, problem.actions, rows, problem.carrier)


def random_labeling(rng: random.Random, size: int, n_labels: int) -> Labeling:
    return Labeling(tuple(f"l{rng.randrange(n_labels)}" for _ in range(size)))


def random_parent_forest_slice(rng: random.Random, d: int) -> tuple[PairwiseSlice, list[int | None]]:
    """Slice whose decision-relevant edges are exactly ``{parent[j], j}``."""
    parents: list[int | None] = [None if j == 0 or rng.random() < 0.3 else rng.randrange(j) for j in range(d)]
    pairs = {(p, j): product_term(1) for j, p in enumerate(parents) if p is not None}
    a = ActionCoefficients.build(d, 0, None, pairs)
    return PairwiseSlice(d, ("a", "b"), (a, ActionCoefficients.zero(d))), parents


# ---------------------------------------------------------------------------
# Closure steps
# ---------------------------------------------------------------------------


def _positive(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(1, 4), rng.randint(1, 3))


def random_step(rng: random.Random, obj: DecisionProblem | PairwiseSlice, allow_extend: bool = True) -> ClosureStep:
    is_slice = isinstance(obj, PairwiseSlice)
    d = obj.d if isinstance(obj, PairwiseSlice) else obj.dimension
    kinds = ["relabel_actions", "relabel_coords", "affine", "duplicate_action"]
    if allow_extend:
        kinds.append("extend_irrelevant")
    if not is_slice:
        kinds.append("duplicate_state")
    kind = rng.choice(kinds)
    if kind == "relabel_actions":
        names = list(obj.actions)
        rng.shuffle(names)
        return RelabelActions(tuple(zip(obj.actions, names, strict=True)))
    if kind == "relabel_coords":
        perm = list(range(d))
        rng.shuffle(perm)
        return RelabelCoords(tuple(perm))
    if kind == "duplicate_action":
        return DuplicateAction(rng.choice(obj.actions))
    if kind == "extend_irrelevant":
        return ExtendIrrelevant()
    if kind == "duplicate_state":
        return DuplicateState(obj.states[rng.randrange(obj.size)])
    if is_slice:
        return Affine(random_coefficients(rng, d), _positive(rng))
    alpha = TableTerm(tuple(random_rational(rng) for _ in range(obj.size)))
    return Affine(alpha, tuple(_positive(rng) for _ in range(obj.size)))


def random_trace(
    rng: random.Random, base: DecisionProblem | PairwiseSlice, length: int, max_dimension: int = 8
) -> list[ClosureStep]:
    steps: list[ClosureStep] = []
    current = base
    for _ in range(length):
        d = current.d if isinstance(current, PairwiseSlice) else current.dimension
        step = random_step(rng, current, allow_extend=d < max_dimension)
        current, _ = apply_step(current, step)
        steps.append(step)
    return steps
