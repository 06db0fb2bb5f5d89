"""Allow running as `python -m relevance_mcp_server`."""

from relevance_mcp_server.server import main

main()
