"""Tracking one target among visually similar moving objects by
bootstrapped instance classification."""

__version__ = "0.1.0"
