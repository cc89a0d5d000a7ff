"""Input/output schemas."""
