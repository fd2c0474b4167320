"""Flood-discourse text analytics: topics, RCA keywords and a relevance index."""

__version__ = "0.1.0"
