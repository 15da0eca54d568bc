"""Feedback loops of linear systems with rate-independent hysteresis."""

__version__ = "0.1.0"
