"""Tests for the pseudolabels package."""
