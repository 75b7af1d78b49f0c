"""Tests for the data package."""
