"""Tests for the fusion package."""
