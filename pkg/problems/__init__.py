"""Convex objective oracles for the experiments."""
