"""Isolated smoke-test runner for generated captioning models."""

__version__ = "0.1.0"
