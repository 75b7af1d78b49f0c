"""Tests for the adaptors package."""
