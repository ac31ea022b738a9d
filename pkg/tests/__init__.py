"""Tests for the relay rate analysis."""
