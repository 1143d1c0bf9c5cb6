"""Vectors, diagonal metrics and Euclidean projections."""
