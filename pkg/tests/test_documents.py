"""Tests for relevance_mcp_server.documents — loading, dumping and field-level errors."""

from __future__ import annotations

from fractions import Fraction

import pytest

from relevance_mcp_server.closure import apply_trace
from relevance_mcp_server.documents import (
    bundle_from_doc,
    bundle_to_doc,
    dump_document,
    format_fraction,
    load_document,
    object_from_doc,
    object_to_doc,
    resolve_workspace_root,
    scheme_from_doc,
    scheme_to_doc,
    spec_from_doc,
    spec_to_doc,
    steps_from_doc,
    trace_from_doc,
    trace_to_doc,
)
from relevance_mcp_server.helpers import DocumentError
from relevance_mcp_server.obstruction import make_family


class TestLoading:
    def test_yaml_file(self, tmp_path):
        path = tmp_path / "p.yaml"
        path.write_text("domains: [2]\nactions: [a]\nutility:\n  a: ['1/2', 3]\n")
        problem = object_from_doc(load_document(path))
        assert problem.row("a") == (Fraction(1, 2), Fraction(3))

    def test_missing_file_is_not_found(self, tmp_path):
        with pytest.raises(KeyError):
            load_document(tmp_path / "absent.json")

    def test_invalid_yaml_names_the_position(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("domains: [2\n")
        with pytest.raises(DocumentError, match="not valid JSON/YAML"):
            load_document(path)

    def test_top_level_must_be_a_mapping(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(DocumentError, match="mapping"):
            load_document(path)

    def test_workspace_root_from_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RELEVANCE_MCP_ROOT", str(tmp_path / "ws"))
        assert resolve_workspace_root() == tmp_path / "ws"


class TestFieldErrors:
    def test_float_utilities_rejected(self):
        doc = {"domains": [2], "actions": ["a"], "utility": {"a": [0.5, 1]}}
        with pytest.raises(DocumentError, match=r"utility\.a\[0\]"):
            object_from_doc(doc)

    def test_undeclared_slice_action(self, load_fixture):
        doc = load_fixture("dominant_pair_base.json")
        doc["coeffs"]["z"] = {"c": "0"}
        with pytest.raises(DocumentError, match="undeclared"):
            object_from_doc(doc)

    def test_bad_pair_key(self):
        doc = {"kind": "slice", "d": 2, "actions": ["a"], "coeffs": {"a": {"pairs": {"0-1": [[0, 0], [0, 1]]}}}}
        with pytest.raises(DocumentError, match="pair key"):
            object_from_doc(doc)

    def test_unknown_step(self):
        with pytest.raises(DocumentError, match="unknown closure step"):
            steps_from_doc({"steps": [{"op": "rotate"}]})

    def test_unknown_kind(self):
        with pytest.raises(DocumentError, match="kind"):
            object_from_doc({"kind": "bundle"})

    def test_scheme_bundle_needs_scheme(self):
        doc = bundle_to_doc(make_family("dominant_pair", 3))
        doc["target"] = "scheme"
        with pytest.raises(DocumentError, match="scheme"):
            bundle_from_doc(doc)

    def test_unknown_spec_variant(self):
        with pytest.raises(DocumentError, match="variant"):
            spec_from_doc({"variant": "fuzzy", "space": [2], "outputs": []})


class TestDumping:
    def test_deterministic_text(self, load_fixture):
        doc = load_fixture("standing_example.json")
        assert dump_document(doc) == dump_document(dict(reversed(list(doc.items()))))

    def test_format_fraction(self):
        assert format_fraction(Fraction(3)) == "3"
        assert format_fraction(Fraction(-1, 4)) == "-1/4"

    @pytest.mark.parametrize(
        "name", ["standing_example.json", "constant.json", "dominant_pair_base.json"]
    )
    def test_objects_reload_unchanged(self, name, load_fixture):
        obj = object_from_doc(load_fixture(name))
        assert object_to_doc(obj) == load_fixture(name)

    def test_bundle_fixture_matches_writer(self, load_fixture):
        golden = load_fixture("bundles/dominant_pair_3.json")
        built = bundle_to_doc(make_family("dominant_pair", 3))
        built.pop("report")
        assert built == golden

    def test_trace_without_transports_is_recomputed(self, dominant_base, load_fixture):
        doc = load_fixture("dominant_pair_affine_trace.json")
        _, expected = apply_trace(dominant_base, steps_from_doc(doc))
        assert trace_from_doc(doc, dominant_base) == expected
        assert trace_from_doc(trace_to_doc(expected), dominant_base) == expected

    def test_scheme_and_spec_writers(self, load_fixture):
        scheme_doc = load_fixture("edge_at_root_scheme.json")
        assert scheme_to_doc(scheme_from_doc(scheme_doc)) == scheme_doc
        spec_doc = load_fixture("pac_spec.json")
        assert spec_to_doc(*spec_from_doc(spec_doc)) == spec_doc
