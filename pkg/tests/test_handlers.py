"""End-to-end tool calls through call_tool, using the shipped fixtures."""

from __future__ import annotations

import pytest

from relevance_mcp_server.documents import fixture_path, slice_to_doc, step_to_doc
from relevance_mcp_server.obstruction import make_family
from relevance_mcp_server.server import call_tool

MARGINED = {
    "kind": "problem",
    "domains": [2, 2],
    "actions": ["a", "b"],
    "utility": {"a": ["0", "0", "2", "2"], "b": ["1", "1", "1", "1"]},
}
NUDGED = {
    "kind": "problem",
    "domains": [2, 2],
    "actions": ["a", "b"],
    "utility": {"a": ["1/4", "0", "2", "9/4"], "b": ["1", "1", "3/4", "1"]},
}


@pytest.fixture()
def call(run_state):
    async def _call(name: str, **arguments):
        return await call_tool(run_state, name, arguments)

    return _call


# ---------------------------------------------------------------------------
# Certification tools
# ---------------------------------------------------------------------------


class TestAnalyze:
    async def test_standing_example(self, call, load_fixture):
        result = await call("relevance.analyze", document=load_fixture("standing_example.json"), coords=[1])
        assert result["ok"] is True
        assert result["minimal_sufficient"] == [0]
        assert result["within_capacity"] is True
        assert result["query"] == {"coords": [1], "sufficient": False, "witness": [[0, 0], [1, 0]]}
        assert result["classes"][1] == {"optimal": ["a"], "states": [[1, 0], [1, 1]]}
        assert result["message"].startswith("2 quotient classes; relevant={0}")

    async def test_constant_problem(self, call):
        result = await call("relevance.analyze", document=str(fixture_path("constant.json")))
        assert result["message"] == "empty set sufficient; all coordinates irrelevant"
        assert result["relevant"] == []

    async def test_summary(self, call, load_fixture):
        result = await call(
            "relevance.analyze", document=load_fixture("standing_example.json"), summary=["p", "p", "q", "q"]
        )
        assert result["summary"] == {"refines_quotient": True, "distinct_symbols": 2}

    async def test_slice_tier(self, call, load_fixture):
        result = await call("relevance.analyze", document=load_fixture("dominant_pair_base.json"))
        assert result["tier"] == "slice"
        assert result["relevant"] == [0, 1]

    async def test_missing_document(self, call):
        result = await call("relevance.analyze")
        assert result["error"]["code"] == "invalid_params"

    async def test_missing_file(self, call, tmp_path):
        result = await call("relevance.analyze", document=str(tmp_path / "absent.json"))
        assert result["error"]["code"] == "not_found"

    async def test_malformed_document_names_the_field(self, call):
        result = await call("relevance.analyze", document={"domains": [2], "actions": ["a"]})
        assert result["error"]["code"] == "invalid_params"
        assert "utility" in result["error"]["message"]

    async def test_budget_override(self, call, load_fixture):
        result = await call("relevance.analyze", document=load_fixture("dominant_pair_base.json"), budget=4)
        assert result["error"]["code"] == "limit_reached"


class TestGraph:
    async def test_raw_graph_with_dichotomy(self, call, load_fixture):
        result = await call("relevance.graph", document=load_fixture("dominant_pair_base.json"), dichotomy=True)
        assert result["ok"] is True
        assert [(e["i"], e["j"]) for e in result["edges"]] == [(0, 1)]
        assert result["verified"] is True
        assert result["dot"].startswith('graph "raw"')
        assert result["artifact"] == result["dot"]
        assert result["dichotomy"]["verdict"] == "not_applicable"

    async def test_problem_is_not_a_slice(self, call, load_fixture):
        result = await call("relevance.graph", document=load_fixture("standing_example.json"))
        assert result["error"]["code"] == "invalid_params"


class TestTransform:
    async def test_affine_trace(self, call, load_fixture):
        result = await call(
            "relevance.transform",
            document=load_fixture("dominant_pair_base.json"),
            trace=load_fixture("dominant_pair_affine_trace.json"),
        )
        assert result["ok"] is True
        assert result["result"]["coeffs"]["a"]["pairs"]["1,2"] == [["0", "0"], ["0", "3"]]
        assert all(c["passed"] for c in result["report"]["checks"])
        assert result["trace"]["transports"][0]["coord_map"] == [0, 1, 2]

    async def test_bad_step_reports_index(self, call, load_fixture):
        trace = {"steps": [{"op": "extend_irrelevant"}, {"op": "relabel_coords", "permutation": [0, 1]}]}
        result = await call("relevance.transform", document=load_fixture("standing_example.json"), trace=trace)
        assert result["error"]["code"] == "invalid_params"
        assert result["error"]["message"].startswith("step 1")


class TestReduce:
    async def test_induce_and_transfer(self, call, load_fixture):
        spec = load_fixture("pac_spec.json")
        induced = await call("relevance.reduce", operation="induce", spec=spec)
        assert induced["actions"] == ["h0", "h1", "h2"]
        assert induced["problem"]["carrier"] == [[1, 0, 0], [1, 1, 0]]
        transfer = await call("relevance.reduce", operation="transfer", spec=spec)
        assert transfer["ok"] is True

    async def test_failure_token_rendered(self, call):
        spec = {"variant": "relational", "space": [2], "outputs": ["y"], "pairs": [[[0], "y"]]}
        result = await call("relevance.reduce", operation="induce", spec=spec)
        assert result["actions"] == ["y", "⊥"]

    async def test_realize(self, call):
        labels = await call("relevance.reduce", operation="realize", domains=[2, 2], labels=["x", "y", "y", "x"])
        assert labels["problem"]["actions"] == ["x", "y"]
        blocks = await call(
            "relevance.reduce", operation="realize", domains=[2, 2], blocks=[[[0, 0], [1, 1]], [[0, 1], [1, 0]]]
        )
        assert blocks["problem"]["actions"] == ["c0", "c1"]

    async def test_realize_needs_labels_or_blocks(self, call):
        result = await call("relevance.reduce", operation="realize", domains=[2])
        assert result["error"]["code"] == "invalid_params"

    async def test_compress(self, call, load_fixture):
        result = await call("relevance.reduce", operation="compress", document=load_fixture("standing_example.json"))
        assert result["profiles"] == {"a": ["a"], "b": ["b"]}

    async def test_present(self, call, load_fixture):
        result = await call(
            "relevance.reduce", operation="present", document=load_fixture("standing_example.json"), mode="indicator"
        )
        assert result["codes"][0] == [1, 0, 0, 0]
        assert result["relevant"] == []

    async def test_unknown_operation(self, call):
        result = await call("relevance.reduce", operation="shrink")
        assert result["error"]["code"] == "invalid_params"


class TestStability:
    async def test_certified(self, call):
        witness = {"type": "relevance", "coordinate": 0, "s": [0, 0], "t": [1, 0]}
        result = await call("relevance.stability", document=MARGINED, other=NUDGED, witness=witness)
        assert result["certificate"] == {"verdict": "certified", "delta": "1/4", "min_gap": "1", "checked_profiles": True}
        assert result["witness_preserved"] is True
        assert "profile_difference" not in result

    async def test_flip(self, call):
        result = await call("relevance.stability", operation="flip", epsilon="1/10", kind="sufficiency")
        assert result["verified"] is True
        assert result["epsilon"] == "1/10"
        assert result["message"] == "sufficiency flips at distance 1/20"

    async def test_refused_reports_difference(self, call):
        tied = {**MARGINED, "utility": {"a": ["1", "1", "1", "1"], "b": ["1", "1", "1", "1"]}}
        result = await call("relevance.stability", document=MARGINED, other=tied)
        assert result["certificate"]["verdict"] == "refused"
        assert result["profile_difference"] == {"base": [0], "perturbed": []}

    async def test_bad_witness_type(self, call):
        result = await call("relevance.stability", document=MARGINED, other=NUDGED, witness={"type": "odd"})
        assert result["error"]["code"] == "invalid_params"


class TestTaxonomy:
    async def test_table(self, call):
        result = await call("relevance.taxonomy")
        assert len(result["families"]) == 15
        assert len(result["mechanisms"]) == 8

    async def test_parent_tree_detection(self, call, load_fixture):
        result = await call(
            "relevance.taxonomy", document=load_fixture("dominant_pair_base.json"), mechanism="parent_tree"
        )
        (entry,) = result["detections"]
        assert entry["hit"] is True
        assert entry["decomposition"]["width"] == 1
        assert result["roles"] == ["core"]

    async def test_tier_mismatch(self, call, load_fixture):
        result = await call(
            "relevance.taxonomy", document=load_fixture("standing_example.json"), mechanism="parent_tree"
        )
        assert result["error"]["code"] == "invalid_params"


# ---------------------------------------------------------------------------
# Witness tools
# ---------------------------------------------------------------------------


class TestWitnessTools:
    async def test_witness_then_verify(self, call):
        built = await call("relevance.witness", kind="offset_signature", n=4)
        assert built["ok"] is True
        assert built["bundle"]["report"]["passed"] is True
        checked = await call("relevance.verify", bundle=built["bundle"])
        assert checked["ok"] is True

    async def test_verify_golden_file(self, call):
        result = await call("relevance.verify", bundle=str(fixture_path("bundles/margin_bounded_3.json")))
        assert result["ok"] is True

    async def test_tampered_bundle(self, call):
        built = await call("relevance.witness", kind="dominant_pair")
        bundle = {**built["bundle"], "translated": built["bundle"]["base"]}
        result = await call("relevance.verify", bundle=bundle)
        assert result["error"]["code"] == "verification_failed"
        failed = {c["name"] for c in result["report"]["checks"] if not c["passed"]}
        assert {"trace_replay", "predicate_flip"} <= failed

    async def test_unknown_family(self, call):
        result = await call("relevance.witness", kind="pretty")
        assert result["error"]["code"] == "invalid_params"

    async def test_classify(self, call, load_fixture):
        base = load_fixture("dominant_pair_base.json")
        by_kind = await call("relevance.classify", slice=base, kind="dominant_pair")
        assert by_kind["verdict"] is True
        by_scheme = await call("relevance.classify", slice=base, scheme=load_fixture("edge_at_root_scheme.json"))
        assert by_scheme["verdict"] is True
        neither = await call("relevance.classify", slice=base)
        assert neither["error"]["code"] == "invalid_params"

    async def test_falsify_found(self, call):
        result = await call("relevance.falsify", kind="ghost_action")
        assert result["found"] is True
        assert result["stats"]["stopped"] == "found"
        assert "elapsed_s" not in result["stats"]
        assert result["seed"] == 0

    async def test_falsify_not_found(self, call, load_fixture):
        result = await call(
            "relevance.falsify", scheme=load_fixture("constant_true_scheme.json"), max_candidates=5
        )
        assert result["found"] is False
        assert result["stats"] == {"bases": 1, "candidates": 5, "stopped": "candidate_limit"}

    async def test_hull_orbit_gap(self, call):
        bundle = make_family("dominant_pair", 3)
        universe = {
            "members": [slice_to_doc(bundle.base), slice_to_doc(bundle.translated)],
            "generators": [step_to_doc(s) for s in bundle.trace.steps],
        }
        result = await call("relevance.hull", universe=universe, q=[0])
        assert result["verdict"] == "orbit_gap"
        assert result["hull"] == [0, 1]
        assert result["witness"] == [0, 1]

    async def test_hull_on_a_restricted_domain(self, call):
        bundle = make_family("dominant_pair", 3)
        ghost = make_family("ghost_action", 3)
        universe = {
            "members": [slice_to_doc(bundle.base), slice_to_doc(bundle.translated), slice_to_doc(ghost.base)],
            "generators": [step_to_doc(s) for s in bundle.trace.steps],
        }
        result = await call("relevance.hull", universe=universe, q=[0, 2], domain=[2])
        assert result["verdict"] == "classifiable"
        assert result["domain"] == [2]
        assert result["classifier"] == [2]
        crossing = await call("relevance.hull", universe=universe, q=[0], domain=[0])
        assert crossing["error"]["code"] == "invalid_params"


class TestTraceTools:
    async def test_status_through_dispatch(self, call):
        result = await call("relevance.trace.status")
        assert result["ok"] is True
        assert result["run"]["self_check"] is True
