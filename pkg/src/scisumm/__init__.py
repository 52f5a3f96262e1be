"""Hybrid content/impact extractive summarization of scientific papers."""

__version__ = "0.1.0"
