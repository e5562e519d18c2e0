"""Command line, configuration, persistence and experiment orchestration."""
