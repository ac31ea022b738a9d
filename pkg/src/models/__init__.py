"""Data models for the relay rate analysis."""
