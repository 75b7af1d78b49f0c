"""Tests for the errors package."""
