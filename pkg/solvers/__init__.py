"""Projected subgradient, heavy-ball and adaptive heavy-ball iterations."""
