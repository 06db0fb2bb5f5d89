"""Tests for relevance_mcp_server.decision — optimizer sets, quotient, certification profile."""

from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings

from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    certification_profile,
    distinct_symbol_count,
    is_relevant,
    is_sufficient,
    is_sufficient_bruteforce,
    optimizer_set,
    quotient,
    relevance_witness,
    summary_refines_quotient,
    sufficiency_witness,
    to_fraction,
)
from relevance_mcp_server.helpers import BudgetExceededError, DomainError
from tests.strategies import problems

# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


class TestConstruction:
    def test_states_are_lexicographic(self):
        assert CoordinateSpace((2, 3)).states() == (
            (0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2),
        )

    def test_index_of_matches_enumeration(self):
        space = CoordinateSpace((3, 2, 2))
        for k, s in enumerate(space.states()):
            assert space.index_of(s) == k

    def test_zero_cardinality_rejected(self):
        with pytest.raises(DomainError):
            CoordinateSpace((2, 0))

    def test_budget_exceeded(self):
        with pytest.raises(BudgetExceededError) as exc_info:
            CoordinateSpace.binary(3).states(budget=4)
        assert exc_info.value.requested == 8
        assert exc_info.value.limit == 4

    def test_state_listing_honours_budget(self):
        problem = DecisionProblem.from_function(CoordinateSpace.binary(3), ["a"], lambda a, s: s[0])
        assert len(problem.states_within(8)) == 8
        with pytest.raises(BudgetExceededError):
            problem.states_within(4)
        with pytest.raises(BudgetExceededError):
            certification_profile(problem, budget=4)

    def test_duplicate_actions_rejected(self):
        with pytest.raises(DomainError):
            DecisionProblem.from_table(CoordinateSpace((2,)), ["a", "a"], {"a": [0, 1]})

    def test_short_row_rejected(self):
        with pytest.raises(DomainError):
            DecisionProblem.from_table(CoordinateSpace((2,)), ["a"], {"a": [0]})

    def test_to_fraction_accepts_strings_and_ints(self):
        assert to_fraction("1/3") == Fraction(1, 3)
        assert to_fraction(4) == Fraction(4)
        assert to_fraction("0.25") == Fraction(1, 4)

    def test_to_fraction_refuses_floats(self):
        with pytest.raises(TypeError):
            to_fraction(0.5)
        with pytest.raises(TypeError):
            to_fraction(True)


# ---------------------------------------------------------------------------
# Standing example
# ---------------------------------------------------------------------------


class TestStandingExample:
    def test_optimizer_sets(self, standing):
        assert optimizer_set(standing, (0, 0)) == {"a", "b"}
        assert optimizer_set(standing, (0, 1)) == {"a", "b"}
        assert optimizer_set(standing, (1, 0)) == {"a"}
        assert optimizer_set(standing, (1, 1)) == {"a"}

    def test_quotient_classes(self, standing):
        q = quotient(standing)
        assert q.class_of == (0, 0, 1, 1)
        assert q.classes == (frozenset({"a", "b"}), frozenset({"a"}))
        assert q.blocks() == [[0, 1], [2, 3]]

    def test_sufficiency(self, standing):
        assert is_sufficient(standing, [0])
        assert not is_sufficient(standing, [1])
        assert is_sufficient(standing, [0, 1])
        assert not is_sufficient(standing, [])

    def test_sufficiency_witness(self, standing):
        assert sufficiency_witness(standing, [1]) == ((0, 0), (1, 0))
        assert sufficiency_witness(standing, [0]) is None

    def test_relevance(self, standing):
        assert is_relevant(standing, 0)
        assert not is_relevant(standing, 1)
        s, t = relevance_witness(standing, 0)
        assert s[1] == t[1]
        assert optimizer_set(standing, s) != optimizer_set(standing, t)

    def test_profile(self, standing):
        profile = certification_profile(standing, check=True)
        assert profile.relevant == {0}
        assert profile.minimal_sufficient == {0}
        assert profile.sufficient_family_generator == {0}
        assert profile.srank == 1
        assert profile.quotient_count == 2
        assert profile.capacity == 2
        assert profile.within_capacity

    def test_summary_refinement(self, standing):
        x0 = [s[0] for s in standing.states]
        x1 = [s[1] for s in standing.states]
        assert summary_refines_quotient(standing, x0)
        assert not summary_refines_quotient(standing, x1)
        assert distinct_symbol_count(x1) == 2

    def test_summary_length_checked(self, standing):
        with pytest.raises(DomainError):
            summary_refines_quotient(standing, [0, 1])

    def test_coordinate_out_of_range(self, standing):
        with pytest.raises(DomainError):
            is_sufficient(standing, [2])


class TestConstantProblem:
    def test_everything_irrelevant(self, load_fixture):
        from relevance_mcp_server.documents import problem_from_doc

        problem = problem_from_doc(load_fixture("constant.json"))
        profile = certification_profile(problem, check=True)
        assert profile.relevant == frozenset()
        assert profile.minimal_sufficient == frozenset()
        assert profile.quotient_count == 1
        assert is_sufficient(problem, [])


# ---------------------------------------------------------------------------
# Abstract tier
# ---------------------------------------------------------------------------


class TestAbstractCarrier:
    def _diagonal(self) -> DecisionProblem:
        return DecisionProblem.from_table(
            CoordinateSpace.binary(2), ["a", "b"], {"a": [1, 0], "b": [0, 1]}, carrier=[(0, 0), (1, 1)]
        )

    def test_relevant_set_need_not_be_sufficient(self):
        profile = certification_profile(self._diagonal())
        assert profile.relevant == frozenset()
        assert profile.sufficient_family_generator is None
        assert profile.minimal_sufficient == {1}
        assert profile.quotient_count == 2
        assert not profile.within_capacity

    def test_positions_follow_carrier(self):
        problem = self._diagonal()
        assert problem.size == 2
        assert optimizer_set(problem, (1, 1)) == {"b"}

    def test_state_outside_carrier(self):
        with pytest.raises(DomainError):
            optimizer_set(self._diagonal(), (0, 1))

    def test_carrier_state_outside_space(self):
        with pytest.raises(DomainError):
            DecisionProblem.from_table(CoordinateSpace.binary(1), ["a"], {"a": [0]}, carrier=[(2,)])


# ---------------------------------------------------------------------------
# Structural guarantees on random problems
# ---------------------------------------------------------------------------


class TestRandomProblems:
    @settings(max_examples=60, deadline=None)
    @given(problems())
    def test_fast_sufficiency_matches_bruteforce(self, problem):
        d = problem.dimension
        for r in range(d + 1):
            for subset in itertools.combinations(range(d), r):
                assert is_sufficient(problem, subset) == is_sufficient_bruteforce(problem, subset)

    @settings(max_examples=60, deadline=None)
    @given(problems())
    def test_sufficient_sets_are_supersets_of_relevant(self, problem):
        profile = certification_profile(problem, check=True)
        d = problem.dimension
        for r in range(d + 1):
            for subset in itertools.combinations(range(d), r):
                assert is_sufficient(problem, subset) == (profile.relevant <= set(subset))
        assert profile.minimal_sufficient == profile.relevant
        assert profile.within_capacity

    @settings(max_examples=40, deadline=None)
    @given(problems())
    def test_quotient_refines_into_relevant_projection(self, problem):
        profile = certification_profile(problem)
        q = quotient(problem)
        labels = [tuple(s[i] for i in sorted(profile.relevant)) for s in problem.states]
        assert summary_refines_quotient(problem, labels)
        assert q.count <= distinct_symbol_count(labels)
