"""Shipped scenario presets (JSON)."""
