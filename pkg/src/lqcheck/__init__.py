"""Verification toolkit for tagged lqCCS, a quantum value-passing calculus."""

__version__ = "0.1.0"
