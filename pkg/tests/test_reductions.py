"""Tests for relevance_mcp_server.reductions — transfers, compression, Boolean presentations."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from relevance_mcp_server.closure import DuplicateAction, apply_step
from relevance_mcp_server.decision import (
    CoordinateSpace,
    DecisionProblem,
    certification_profile,
    is_sufficient,
    optimizer_set,
    quotient,
)
from relevance_mcp_server.documents import spec_from_doc
from relevance_mcp_server.helpers import DomainError
from relevance_mcp_server.reductions import (
    FAILURE_SYMBOL,
    FAILURE_TOKEN,
    DeterministicSpec,
    RelationalSpec,
    SetValuedSpec,
    admissible_equivalence,
    compress_profiles,
    induce_problem,
    pass_bit_spec,
    pass_bits,
    present_as_bits,
    relation_relevant,
    relation_sufficient,
    render_output,
    threshold_admissibility,
    transfer_check,
)
from tests.strategies import admissibility_specs, problems, rngs


@pytest.fixture()
def pac(load_fixture):
    return spec_from_doc(load_fixture("pac_spec.json"))


# ---------------------------------------------------------------------------
# Transfers
# ---------------------------------------------------------------------------


class TestInduceProblem:
    def test_pass_bit_example(self, pac):
        spec, space, carrier = pac
        problem = induce_problem(spec, space, carrier=carrier)
        assert problem.actions == ("h0", "h1", "h2")
        assert optimizer_set(problem, (1, 0, 0)) == {"h0"}
        assert optimizer_set(problem, (1, 1, 0)) == {"h0", "h1"}
        assert quotient(problem).count == 2
        assert is_sufficient(problem, [1])
        assert not is_sufficient(problem, [0, 2])

    def test_relation_level_agrees(self, pac):
        spec, space, carrier = pac
        assert relation_sufficient(spec, space, [1], carrier=carrier)
        assert relation_relevant(spec, space, 1, carrier=carrier)
        assert not relation_relevant(spec, space, 0, carrier=carrier)
        assert admissible_equivalence(spec, space, carrier=carrier) == (0, 1)

    def test_transfer_check_passes(self, pac):
        spec, space, carrier = pac
        report = transfer_check(spec, space, carrier=carrier)
        assert report.passed, report.to_dict()
        assert [c.name for c in report.checks] == ["partition", "sufficiency", "relevance"]

    def test_transfer_check_above_subset_cap(self, pac):
        spec, space, carrier = pac
        assert transfer_check(spec, space, carrier=carrier, subset_cap=0).passed

    def test_deterministic(self):
        space = CoordinateSpace.binary(2)
        spec = DeterministicSpec(("lo", "hi"), ("lo", "lo", "hi", "hi"))
        problem = induce_problem(spec, space)
        assert optimizer_set(problem, (1, 0)) == {"hi"}
        assert relation_sufficient(spec, space, [0])
        assert not relation_sufficient(spec, space, [1])

    def test_deterministic_value_outside_universe(self):
        spec = DeterministicSpec(("lo",), ("lo", "mid"))
        with pytest.raises(DomainError, match="mid"):
            induce_problem(spec, CoordinateSpace.binary(1))

    def test_empty_fibers_totalize(self):
        space = CoordinateSpace((2,))
        spec = RelationalSpec(outputs=("y",), pairs=(((0,), "y"),))
        problem = induce_problem(spec, space)
        assert problem.actions == ("y", FAILURE_TOKEN)
        assert optimizer_set(problem, (1,)) == {FAILURE_TOKEN}
        assert optimizer_set(problem, (0,)) == {"y"}
        report = transfer_check(spec, space)
        assert report.get("totalization").passed
        assert render_output(FAILURE_TOKEN) == FAILURE_SYMBOL
        assert render_output("y") == "y"

    def test_gap_values_are_used(self):
        space = CoordinateSpace((2,))
        spec = SetValuedSpec(
            outputs=("p", "q"),
            sets=(frozenset({"p"}), frozenset({"p", "q"})),
            allowed=Fraction(5),
            blocked=Fraction(-1),
        )
        problem = induce_problem(spec, space)
        assert problem.row("q") == (Fraction(-1), Fraction(5))

    def test_gap_must_be_strict(self):
        spec = SetValuedSpec(outputs=("p",), sets=(frozenset({"p"}),), allowed=Fraction(0), blocked=Fraction(0))
        with pytest.raises(DomainError, match="strict"):
            induce_problem(spec, CoordinateSpace((1,)))

    def test_reserved_output_id(self):
        spec = SetValuedSpec(outputs=(FAILURE_TOKEN,), sets=(frozenset(),))
        with pytest.raises(DomainError, match="reserved"):
            induce_problem(spec, CoordinateSpace((1,)))

    def test_relational_unknown_state(self):
        spec = RelationalSpec(outputs=("y",), pairs=(((3,), "y"),))
        with pytest.raises(DomainError, match="unknown state"):
            induce_problem(spec, CoordinateSpace((2,)))

    @settings(max_examples=200, deadline=None)
    @given(admissibility_specs())
    def test_random_specs_transfer(self, drawn):
        spec, space = drawn
        report = transfer_check(spec, space, subset_cap=4)
        assert report.passed, report.to_dict()
        fibers = spec.admissible_sets(space.states())
        problem = induce_problem(spec, space)
        for pos, fiber in enumerate(fibers):
            assert problem.opt_at(pos) == (fiber or {FAILURE_TOKEN})


class TestThresholds:
    LOSSES = {"h0": "1/10", "h1": "1/5", "h2": "1/2"}

    def test_threshold_admissibility(self):
        assert threshold_admissibility(self.LOSSES, "1/5") == {"h0", "h1"}
        assert threshold_admissibility(self.LOSSES, 0) == frozenset()

    def test_pass_bits(self):
        assert pass_bits(self.LOSSES, "1/5") == (1, 1, 0)

    def test_pass_bit_spec_matches_fixture(self, pac):
        space, carrier, spec = pass_bit_spec(["h0", "h1", "h2"], always_pass=["h0"], always_fail=["h2"])
        assert (spec, space, carrier) == pac

    def test_contradictory_pins(self):
        with pytest.raises(DomainError):
            pass_bit_spec(["h0"], always_pass=["h0"], always_fail=["h0"])
        with pytest.raises(DomainError, match="Unknown"):
            pass_bit_spec(["h0"], always_pass=["h9"])


# ---------------------------------------------------------------------------
# Compression
# ---------------------------------------------------------------------------


class TestCompressProfiles:
    def test_problem_duplicates_merge(self):
        problem = DecisionProblem.from_table(
            CoordinateSpace.binary(2), ["a", "b", "c"], {"a": [0, 0, 1, 1], "b": [0, 0, 0, 0], "c": [0, 0, 1, 1]}
        )
        out = compress_profiles(problem, check=True)
        assert out.profiles == {"a": ("a", "c"), "b": ("b",)}
        assert out.distinct == 2
        assert out.result.actions == ("a", "b")
        assert quotient(out.result).count == quotient(problem).count

    def test_slice_duplicates_merge(self, dominant_base):
        doubled, _ = apply_step(dominant_base, DuplicateAction("a"))
        out = compress_profiles(doubled, check=True)
        assert out.result == dominant_base
        assert out.profiles["a"] == ("a", "a~1")

    def test_distinct_profiles_untouched(self, standing):
        out = compress_profiles(standing)
        assert out.result == standing
        assert out.distinct == 2

    @settings(max_examples=100, deadline=None)
    @given(problems(), rngs)
    def test_injected_duplicates_keep_certification(self, problem, rng: random.Random):
        doubled, _ = apply_step(problem, DuplicateAction(rng.choice(problem.actions)))
        out = compress_profiles(doubled, check=True)
        assert out.distinct == len(set(problem.utility))
        assert len(out.result.actions) == out.distinct
        assert certification_profile(out.result) == certification_profile(problem)
        d = problem.dimension
        for r in range(d + 1):
            for subset in itertools.combinations(range(d), r):
                assert is_sufficient(out.result, subset) == is_sufficient(doubled, subset)


# ---------------------------------------------------------------------------
# Boolean presentations
# ---------------------------------------------------------------------------


class TestPresentAsBits:
    def test_binary_on_a_power_of_two(self, standing):
        bits = present_as_bits(standing)
        assert bits.width == 2
        assert bits.codes == ((0, 0), (0, 1), (1, 0), (1, 1))
        assert bits.relevant(0)
        assert not bits.relevant(1)

    def test_binary_pads_by_aliasing(self):
        problem = DecisionProblem.from_table(CoordinateSpace((3,)), ["a", "b"], {"a": [0, 1, 1], "b": [0, 0, 0]})
        bits = present_as_bits(problem)
        assert bits.width == 2
        assert bits.encode(2) == (1, 0)
        assert bits.decode((1, 1)) == 2
        assert bits.problem.row("a") == (0, 1, 1, 1)
        assert bits.relevant(0)
        assert bits.relevant(1)

    @pytest.mark.parametrize(("n", "width"), [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4)])
    def test_binary_width_is_the_bit_length(self, n, width):
        problem = DecisionProblem.from_table(CoordinateSpace((n,)), ["a"], {"a": list(range(n))})
        bits = present_as_bits(problem)
        assert bits.width == width
        assert bits.decode(bits.encode(n - 1)) == n - 1

    def test_indicator(self, standing):
        bits = present_as_bits(standing, "indicator")
        assert bits.width == 4
        assert bits.encode(1) == (0, 1, 0, 0)
        assert bits.decode((0, 0, 1, 0)) == 2
        assert bits.sufficient([2, 3])
        assert not bits.sufficient([3])
        with pytest.raises(DomainError, match="one-hot"):
            bits.decode((1, 1, 0, 0))

    def test_single(self, standing):
        bits = present_as_bits(standing, "single")
        assert bits.width == 1
        assert bits.sufficient([0])
        assert bits.decode((3,)) == 3

    def test_encode_out_of_range(self, standing):
        with pytest.raises(DomainError):
            present_as_bits(standing).encode(4)

    def test_unknown_mode(self, standing):
        with pytest.raises(DomainError):
            present_as_bits(standing, "gray")
