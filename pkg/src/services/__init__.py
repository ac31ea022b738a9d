"""Services for the relay rate analysis."""
