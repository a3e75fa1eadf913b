"""Repository mining for code-improvement prioritization and impact analysis."""

__version__ = "0.1.0"
