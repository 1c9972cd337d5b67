"""Failure classes for the adapter scripts."""


class AdapterError(Exception):
    """Invalid adapter configuration or backend contract violation."""
