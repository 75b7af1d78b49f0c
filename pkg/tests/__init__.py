"""Grappa test suite."""
