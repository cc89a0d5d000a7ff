"""Conversions between IR levels."""
