"""Associative arrays and a packet-capture graph pipeline built on them."""

__version__ = "0.1.0"
