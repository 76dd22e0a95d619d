"""Tests for the nonlocal-compactness package."""
