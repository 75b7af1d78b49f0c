"""Tests for the retrieval package."""
