"""Scenario files, run orchestration and result emission."""
