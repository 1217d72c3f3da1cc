"""Differential testing workbench for HTTP/1.1 request parsing."""

__version__ = "0.1.0"
