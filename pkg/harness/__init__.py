"""Experiment harness: configuration, runs, comparisons and verification suites."""
