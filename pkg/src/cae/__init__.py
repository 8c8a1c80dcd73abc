"""Cumulative accessibility estimation (C-learning) for goal-conditioned RL."""

__version__ = "0.1.0"
