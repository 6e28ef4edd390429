"""Experiment harness: configuration, trial runner, CSV output and CLI."""
