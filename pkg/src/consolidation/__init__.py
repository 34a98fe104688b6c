"""Consolidation engine: turns long assistant conversations into fine-tuned
adapter weights (reflect, synthesize, train) and reproduces the matched
experiment comparing consolidation against cascading context compaction.
"""

__version__ = "0.1.0"
