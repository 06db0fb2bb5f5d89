"""Exact relevance certification for finite decision problems, as an MCP server and a batch CLI."""
