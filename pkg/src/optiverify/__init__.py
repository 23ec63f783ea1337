"""Desk-scale simulator for linear-optical verification of 2-out-of-4 SAT."""

__version__ = "0.1.0"
