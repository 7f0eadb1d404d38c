"""Corpus construction and evaluation toolkit for the SKILL language."""

__version__ = "0.1.0"
