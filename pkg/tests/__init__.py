"""Tests for entrofact."""
