"""Approachability of convex sets in repeated games with vector payoffs and partial monitoring."""

__version__ = "0.1.0"
