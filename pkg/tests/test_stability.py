"""Tests for relevance_mcp_server.stability — gaps, global certificates, witness preservation, flips."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from relevance_mcp_server.decision import CoordinateSpace, DecisionProblem, certification_profile
from relevance_mcp_server.helpers import DomainError
from relevance_mcp_server.stability import (
    FLIP_KINDS,
    GapProfile,
    NonSufficiencyWitness,
    RelevanceWitness,
    global_stability_certificate,
    make_flip_pair,
    profile_difference,
    uniform_distance,
    verify_flip,
    witness_failure,
    witness_preservation,
)
from tests.strategies import problems, rngs

SPACE = CoordinateSpace.binary(2)


@pytest.fixture()
def margined():
    """U(a, x) = 2 x0 against a constant U(b, x) = 1: every gap is 1."""
    return DecisionProblem.from_table(SPACE, ["a", "b"], {"a": [0, 0, 2, 2], "b": [1, 1, 1, 1]})


def _nudge(problem: DecisionProblem, rows: dict[str, list[str]]) -> DecisionProblem:
    return DecisionProblem.from_table(problem.space, list(problem.actions), rows)


class TestGaps:
    def test_gap_profile(self, standing, margined):
        assert GapProfile.of(standing).gaps == (0, 0, 1, 1)
        assert GapProfile.of(margined).min_gap == 1

    def test_lone_action_has_no_gap(self):
        problem = DecisionProblem.from_table(SPACE, ["a"], {"a": [0, 1, 2, 3]})
        profile = GapProfile.of(problem)
        assert profile.gaps == (None,) * 4
        assert profile.min_gap is None
        assert profile.exceeds(0, Fraction(100))

    def test_distance_needs_matching_shapes(self, standing, margined):
        assert uniform_distance(standing, margined) == 1
        other = DecisionProblem.from_table(SPACE, ["a", "c"], {"a": [0] * 4, "c": [0] * 4})
        with pytest.raises(DomainError):
            uniform_distance(standing, other)


class TestGlobalCertificate:
    def test_small_perturbation_certified(self, margined):
        e = _nudge(margined, {"a": ["1/4", "0", "2", "9/4"], "b": ["1", "1", "3/4", "1"]})
        cert = global_stability_certificate(margined, e, check=True)
        assert cert.certified
        assert cert.delta == Fraction(1, 4)
        assert cert.min_gap == 1
        assert cert.checked_profiles
        assert profile_difference(margined, e) == {}

    def test_gap_not_above_twice_distance_refused(self, margined):
        e = _nudge(margined, {"a": ["1/2", "0", "2", "2"], "b": ["1", "1", "1", "1"]})
        cert = global_stability_certificate(margined, e, check=True)
        assert cert.verdict == "refused"
        assert not cert.checked_profiles

    def test_lone_action_always_certified(self):
        d = DecisionProblem.from_table(SPACE, ["a"], {"a": [0, 0, 0, 0]})
        e = DecisionProblem.from_table(SPACE, ["a"], {"a": [5, 0, -5, 0]})
        assert global_stability_certificate(d, e, check=True).certified

    @settings(max_examples=60, deadline=None)
    @given(problems(), rngs)
    def test_certificates_never_lie(self, problem, rng: random.Random):
        rows = tuple(tuple(u + Fraction(rng.randint(-3, 3), 16) for u in row) for row in problem.utility)
        e = DecisionProblem(problem.space, problem.actions, rows, problem.carrier)
        cert = global_stability_certificate(problem, e, check=True)
        if cert.certified:
            p, q = certification_profile(problem), certification_profile(e)
            assert p.relevant == q.relevant


class TestWitnessPreservation:
    def test_relevance_witness_survives(self, margined):
        e = _nudge(margined, {"a": ["1/4", "0", "2", "9/4"], "b": ["1", "1", "3/4", "1"]})
        w = RelevanceWitness(0, (0, 0), (1, 0))
        assert witness_failure(margined, w) is None
        assert witness_preservation(margined, e, w, check=True)

    def test_no_claim_when_distance_too_large(self, margined):
        e = _nudge(margined, {"a": ["1", "1", "1", "1"], "b": ["1", "1", "1", "1"]})
        assert not witness_preservation(margined, e, RelevanceWitness(0, (0, 0), (1, 0)))

    def test_non_sufficiency_witness(self, margined):
        w = NonSufficiencyWitness((1,), (0, 1), (1, 1))
        assert witness_failure(margined, w) is None
        assert witness_failure(margined, NonSufficiencyWitness((0,), (0, 1), (1, 1))) == "states differ on [0]"

    def test_witness_must_hold_in_base(self, standing, margined):
        w = RelevanceWitness(0, (0, 0), (1, 0))
        assert "singletons" in witness_failure(standing, w)
        with pytest.raises(DomainError, match="not valid in the base"):
            witness_preservation(standing, margined, w)

    def test_states_off_coordinate(self, margined):
        failure = witness_failure(margined, RelevanceWitness(0, (0, 0), (1, 1)))
        assert failure == "states differ off coordinate 0"


class TestFlipPairs:
    @pytest.mark.parametrize("kind", FLIP_KINDS)
    def test_flip_verifies(self, kind):
        pair = make_flip_pair("1/10", kind)
        assert verify_flip(pair)
        assert uniform_distance(pair.tracking, pair.tied) == Fraction(1, 20)

    def test_flip_changes_relevance(self):
        pair = make_flip_pair(Fraction(1, 1000))
        assert profile_difference(pair.tracking, pair.tied) == {"base": [0], "perturbed": []}

    def test_certificate_refuses_flip_pairs(self):
        pair = make_flip_pair("1/10")
        assert not global_stability_certificate(pair.tracking, pair.tied).certified

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            make_flip_pair(0)
        with pytest.raises(DomainError):
            make_flip_pair("1/2", "parity")
