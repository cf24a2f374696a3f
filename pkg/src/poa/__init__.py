"""Passable-obstacle-aware motion planning for two-wheeled robots."""

__version__ = "0.1.0"
