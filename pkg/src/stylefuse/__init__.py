"""Audience-preference style analysis and desk-scale style infusion."""

__version__ = "0.1.0"
