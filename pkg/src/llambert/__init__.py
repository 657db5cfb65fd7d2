"""LLM-assisted corpus labeling: annotate a subset with an LLM (or mock
oracle), train a cheap classifier on the parsed labels, and evaluate."""

__version__ = "0.1.0"
