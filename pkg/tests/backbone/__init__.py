"""Tests for the backbone package."""
