"""Thin command controllers for the CLI."""
