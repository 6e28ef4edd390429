"""Robust designs under bounded CSI error."""
