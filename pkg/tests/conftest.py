"""Shared fixtures for relevance certification tests."""

from __future__ import annotations

import pytest

from relevance_mcp_server.documents import fixture_path, load_document, object_from_doc
from relevance_mcp_server.state import RunConfig, RunState


@pytest.fixture(autouse=True)
def _isolated_workspace(monkeypatch, tmp_path):
    """Keep trace files out of the checkout and start every test without a call log."""
    monkeypatch.setenv("RELEVANCE_MCP_ROOT", str(tmp_path / ".relevance_mcp"))
    monkeypatch.setattr("relevance_mcp_server.trace._log", None)


@pytest.fixture()
def run_state():
    """RunState with the defaults and self-checks on."""
    return RunState(RunConfig(self_check=True))


@pytest.fixture()
def load_fixture():
    """Load a shipped fixture document by file name."""

    def _load(name: str) -> dict:
        return load_document(fixture_path(name))

    return _load


@pytest.fixture()
def standing(load_fixture):
    """U(a, x) = x0, U(b, x) = 0 on two binary coordinates."""
    return object_from_doc(load_fixture("standing_example.json"))


@pytest.fixture()
def dominant_base(load_fixture):
    """U(a, x) = 2 x0 x1, U(b, x) = 0 on three binary coordinates."""
    return object_from_doc(load_fixture("dominant_pair_base.json"))
